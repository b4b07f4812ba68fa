#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the Gradient Verifier
"""

import os
import sys
import tempfile
import unittest

import yaml

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.verification.gradient_verifier import GradientVerifier


class TestGradientVerifier(unittest.TestCase):
    """
    Tests for the finite-difference suites
    """

    def test_op_suite_passes(self):
        """
        Test that every differentiable operation passes
        """
        verifier = GradientVerifier(seed=3)
        self.assertTrue(verifier.verify(['ops']))
        names = [result.name for result in verifier.results]
        for op in ('ops.matmul.left', 'ops.log_softmax', 'ops.conv2d.depthwise', 'ops.cross_entropy'):
            self.assertIn(op, names)
        self.assertTrue(all(result.coordinates > 0 for result in verifier.results))

    def test_emonet_suite_passes(self):
        """
        Test the toy extractor gradients
        """
        verifier = GradientVerifier()
        self.assertTrue(verifier.verify(['emonet']))
        self.assertEqual([r.name for r in verifier.results],
                         ['emonet.input', 'emonet.conv1.weight', 'emonet.feature.weight'])

    def test_tolerance_decides(self):
        """
        Test that an impossible tolerance marks checks as failed
        """
        verifier = GradientVerifier(tolerance=-1.0)
        with self.assertLogs('src.verification.gradient_verifier', level='ERROR'):
            self.assertFalse(verifier.verify(['emonet']))
        self.assertFalse(any(result.passed for result in verifier.results))

    def test_write_results(self):
        """
        Test the results file
        """
        verifier = GradientVerifier()
        verifier.verify(['emonet'])
        with tempfile.TemporaryDirectory() as out:
            path = os.path.join(out, 'grad_check.yaml')
            verifier.write_results(path)
            with open(path) as f:
                data = yaml.safe_load(f)
        self.assertTrue(data['passed'])
        self.assertEqual(data['tolerance'], 1e-4)
        self.assertEqual(len(data['checks']), 3)
        self.assertLessEqual(max(check['error'] for check in data['checks']), 1e-4)


if __name__ == '__main__':
    unittest.main()
