#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the affine coupling units
"""

import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import ConfigError, ShapeError
from src.numeric_core import tensor as T
from src.numeric_core.gradcheck import grad_check, numeric_jacobian
from src.numeric_core.tensor import Tensor
from src.nvpf.coupling import alternating_masks, coupling_forward, coupling_inverse, half_mask, init_coupling_unit


def random_unit(mask, seed=0, filters=2, blocks=1):
    return init_coupling_unit(mask, filters, blocks, np.random.default_rng(seed), zero_output=False)


class TestMasks(unittest.TestCase):
    """
    Tests for the coupling masks
    """

    def test_half_mask_rows(self):
        """
        Test that multi-row grids split by rows
        """
        np.testing.assert_array_equal(half_mask(4, 3), [[1, 1, 1], [1, 1, 1], [0, 0, 0], [0, 0, 0]])

    def test_half_mask_single_row(self):
        """
        Test that a single-row grid splits by columns
        """
        np.testing.assert_array_equal(half_mask(1, 4), [[1, 1, 0, 0]])
        with self.assertRaises(ConfigError):
            half_mask(1, 1)

    def test_alternating_complements(self):
        """
        Test that consecutive masks complement each other
        """
        masks = alternating_masks(3, 2, 4)
        self.assertEqual(len(masks), 4)
        for a, b in zip(masks, masks[1:]):
            np.testing.assert_array_equal(a + b, np.ones((3, 2)))


class TestCouplingUnit(unittest.TestCase):
    """
    Tests for coupling_forward and coupling_inverse
    """

    def test_zero_unit_is_identity(self):
        """
        Test that a unit with zero output layers leaves S unchanged
        """
        unit = init_coupling_unit(half_mask(4, 3), filters=2, residual_blocks=1)
        S = np.random.default_rng(0).normal(size=(4, 3))
        Y, log_det = coupling_forward(Tensor(S), unit)
        np.testing.assert_array_equal(Y.data, S)
        self.assertEqual(log_det.item(), 0.0)

    def test_fixed_cells_pass_through(self):
        """
        Test that cells selected by the mask are copied exactly
        """
        mask = half_mask(4, 3)
        S = np.random.default_rng(1).normal(size=(4, 3))
        Y, _ = coupling_forward(Tensor(S), random_unit(mask, seed=2))
        np.testing.assert_array_equal(Y.data[mask == 1], S[mask == 1])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10 ** 6))
    def test_inverse_recovers_input(self, seed):
        """
        Test that the inverse undoes the forward pass
        """
        rng = np.random.default_rng(seed)
        unit = random_unit(alternating_masks(4, 3, 2)[seed % 2], seed=seed)
        S = rng.normal(size=(4, 3))
        column_mask = np.array([1, 1, 0]) if seed % 3 == 0 else None
        Y, _ = coupling_forward(Tensor(S), unit, column_mask)
        np.testing.assert_allclose(coupling_inverse(Y, unit, column_mask).data, S, atol=1e-10)

    def test_log_det_matches_jacobian(self):
        """
        Test the log-determinant against the finite-difference Jacobian
        """
        unit = random_unit(half_mask(4, 3), seed=3)
        S = np.random.default_rng(4).normal(size=(4, 3))
        for column_mask in (None, np.array([1, 0, 1])):
            _, log_det = coupling_forward(Tensor(S), unit, column_mask)
            jacobian = numeric_jacobian(lambda s: coupling_forward(Tensor(s), unit, column_mask)[0].data, S)
            sign, logabs = np.linalg.slogdet(jacobian)
            self.assertEqual(sign, 1.0)
            self.assertAlmostEqual(log_det.item(), logabs, places=5)

    def test_log_det_small_grids(self):
        """
        Test the log-determinant on 1x2, 2x2 and 3x3 grids over 20 seeds each
        """
        for rows, cols in ((1, 2), (2, 2), (3, 3)):
            for seed in range(20):
                unit = random_unit(alternating_masks(rows, cols, 2)[seed % 2], seed=seed)
                S = np.random.default_rng(100 + seed).normal(size=(rows, cols))
                _, log_det = coupling_forward(Tensor(S), unit)
                jacobian = numeric_jacobian(lambda s: coupling_forward(Tensor(s), unit)[0].data, S)
                _, logabs = np.linalg.slogdet(jacobian)
                self.assertLessEqual(abs(log_det.item() - logabs), 1e-3 * max(1.0, abs(logabs)),
                                     f"{rows}x{cols} seed {seed}")

    def test_padded_columns_ignored(self):
        """
        Test that padded cells neither change nor influence the output
        """
        unit = random_unit(half_mask(4, 3), seed=5)
        column_mask = np.array([1, 1, 0])
        S = np.random.default_rng(6).normal(size=(4, 3))
        noisy = S.copy()
        noisy[:, 2] = 100.0
        Y, log_det = coupling_forward(Tensor(S), unit, column_mask)
        Y_noisy, log_det_noisy = coupling_forward(Tensor(noisy), unit, column_mask)
        np.testing.assert_array_equal(Y.data[:, :2], Y_noisy.data[:, :2])
        np.testing.assert_array_equal(Y_noisy.data[:, 2], noisy[:, 2])
        self.assertEqual(log_det.item(), log_det_noisy.item())

    def test_scale_is_bounded(self):
        """
        Test that huge subnetwork outputs keep the log-scale within its bound
        """
        unit = random_unit(half_mask(2, 2), seed=7)
        unit.params['scale.conv_out.weight'].data *= 1e6
        _, log_det = coupling_forward(Tensor(np.ones((2, 2))), unit)
        # two active cells
        self.assertLessEqual(abs(log_det.item()), 2 * unit.scale_bound + 1e-12)

    def test_batch_matches_single(self):
        """
        Test that batched samples match one-at-a-time results
        """
        unit = random_unit(half_mask(4, 3), seed=8)
        S = np.random.default_rng(9).normal(size=(2, 4, 3))
        masks = np.array([[1, 1, 1], [1, 1, 0]])
        Y, log_det = coupling_forward(Tensor(S), unit, masks)
        self.assertEqual(log_det.shape, (2,))
        for b in range(2):
            Y_b, log_det_b = coupling_forward(Tensor(S[b]), unit, masks[b])
            np.testing.assert_allclose(Y.data[b], Y_b.data, atol=1e-12)
            self.assertAlmostEqual(log_det.data[b], log_det_b.item(), places=12)

    def test_shape_checked(self):
        """
        Test that inputs and column masks must match the unit
        """
        unit = init_coupling_unit(half_mask(4, 3), filters=2, residual_blocks=1)
        with self.assertRaises(ShapeError):
            coupling_forward(Tensor(np.zeros((3, 4))), unit)
        with self.assertRaises(ShapeError):
            coupling_forward(Tensor(np.zeros((4, 3))), unit, np.array([1, 1]))

    def test_gradient(self):
        """
        Test the gradient with respect to S
        """
        unit = random_unit(half_mask(2, 3), seed=10)
        weights = np.random.default_rng(11).uniform(-1.0, 1.0, size=(2, 3))
        S = Tensor(np.random.default_rng(12).normal(size=(2, 3)))

        def loss(s):
            Y, log_det = coupling_forward(s, unit)
            return T.add(T.reduce_sum(T.mul(Y, weights)), log_det)

        self.assertLessEqual(grad_check(loss, S), 1e-4)


if __name__ == '__main__':
    unittest.main()
