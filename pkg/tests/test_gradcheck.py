#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the finite-difference oracles
"""

import os
import sys
import unittest

import numpy as np

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import DomainError, ShapeError
from src.numeric_core import tensor as T
from src.numeric_core.gradcheck import grad_check, numeric_jacobian
from src.numeric_core.tensor import Tensor, _result


class TestGradCheck(unittest.TestCase):
    """
    Tests for grad_check
    """

    def test_correct_gradient_passes(self):
        """
        Test that a correct analytic gradient gives a tiny error
        """
        x = Tensor(np.array([0.3, -1.2, 2.0]))
        self.assertLess(grad_check(lambda t: T.reduce_sum(T.mul(T.tanh(t), t)), x), 1e-6)

    def test_wrong_gradient_detected(self):
        """
        Test that a deliberately wrong gradient rule is caught
        """
        def doubled_square(t):
            # forward t², backward claims 4t
            return _result(t.data ** 2, (t,), lambda g: (4.0 * g * t.data,), "bad")

        x = Tensor(np.array([1.0, 2.0]))
        self.assertGreater(grad_check(lambda t: T.reduce_sum(doubled_square(t)), x), 0.4)

    def test_input_untouched(self):
        """
        Test that the checked point keeps its values
        """
        x = Tensor(np.array([1.0, 2.0]))
        grad_check(lambda t: T.reduce_sum(T.exp(t)), x)
        np.testing.assert_array_equal(x.data, [1.0, 2.0])

    def test_step_range(self):
        """
        Test that the step must lie in [1e-7, 1e-3]
        """
        x = Tensor(np.ones(2))
        f = lambda t: T.reduce_sum(t)
        with self.assertRaises(DomainError):
            grad_check(f, x, eps=1e-2)
        with self.assertRaises(DomainError):
            grad_check(f, x, eps=1e-9)

    def test_scalar_function_required(self):
        """
        Test that vector-valued functions are rejected
        """
        with self.assertRaises(ShapeError):
            grad_check(lambda t: T.exp(t), Tensor(np.ones(2)))

    def test_constant_function(self):
        """
        Test that a function ignoring its input has zero error
        """
        self.assertEqual(grad_check(lambda t: Tensor(3.0), Tensor(np.ones(2))), 0.0)


class TestNumericJacobian(unittest.TestCase):
    """
    Tests for numeric_jacobian
    """

    def test_linear_map(self):
        """
        Test that the Jacobian of a linear map is its matrix
        """
        A = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        J = numeric_jacobian(lambda v: A @ v, np.array([0.5, -0.5]))
        np.testing.assert_allclose(J, A, atol=1e-8)

    def test_matrix_input_flattened(self):
        """
        Test that matrix inputs are flattened in row-major order
        """
        J = numeric_jacobian(lambda m: m ** 2, np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_allclose(J, np.diag([2.0, 4.0, 6.0, 8.0]), atol=1e-6)


if __name__ == '__main__':
    unittest.main()
