#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the tensor and reverse-mode differentiation
"""

import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import DomainError, ShapeError
from src.numeric_core import tensor as T
from src.numeric_core.gradcheck import grad_check
from src.numeric_core.tensor import Tensor, backward, parameter


def weighted_sum(t: Tensor, seed: int = 7) -> Tensor:
    w = np.random.default_rng(seed).uniform(-1.0, 1.0, size=t.shape)
    return T.reduce_sum(T.mul(t, w))


class TestTensorBasics(unittest.TestCase):
    """
    Tests for tensor construction and shape handling
    """

    def test_float64_storage(self):
        """
        Test that values are stored as 64-bit floats
        """
        t = Tensor([1, 2, 3])
        self.assertEqual(t.data.dtype, np.float64)
        self.assertEqual(t.shape, (3,))

    def test_zero_extent_rejected(self):
        """
        Test that tensors with an empty axis are rejected
        """
        with self.assertRaises(ShapeError):
            Tensor(np.zeros((2, 0)))

    def test_item_needs_single_element(self):
        """
        Test item() on scalar and non-scalar tensors
        """
        self.assertEqual(Tensor(2.5).item(), 2.5)
        with self.assertRaises(ShapeError):
            Tensor([1.0, 2.0]).item()

    def test_parameter_copies_data(self):
        """
        Test that a parameter does not alias the caller's array
        """
        data = np.ones(3)
        p = parameter(data)
        data[0] = 5.0
        self.assertEqual(p.data[0], 1.0)
        self.assertTrue(p.requires_grad)

    def test_elementwise_shape_mismatch(self):
        """
        Test that only scalar operands broadcast implicitly
        """
        with self.assertRaises(ShapeError):
            T.add(Tensor(np.ones((2, 3))), Tensor(np.ones(3)))
        out = T.add(Tensor(np.ones((2, 3))), 2.0)
        np.testing.assert_array_equal(out.data, np.full((2, 3), 3.0))

    def test_log_domain(self):
        """
        Test that log rejects non-positive input
        """
        with self.assertRaises(DomainError):
            T.log(Tensor([1.0, 0.0]))

    def test_elementwise_by_name(self):
        """
        Test dispatch of pointwise operations by name
        """
        x = Tensor([-1.0, 2.0])
        np.testing.assert_array_equal(T.elementwise('relu', x).data, [0.0, 2.0])
        np.testing.assert_array_equal(T.elementwise('hadamard', x, x).data, [1.0, 4.0])
        with self.assertRaises(DomainError):
            T.elementwise('sqrt', x)

    def test_matmul_shapes(self):
        """
        Test the matrix product and its shape check
        """
        a = Tensor(np.arange(6.0).reshape(2, 3))
        b = Tensor(np.ones((3, 2)))
        np.testing.assert_array_equal((a @ b).data, [[3.0, 3.0], [12.0, 12.0]])
        with self.assertRaises(ShapeError):
            T.matmul(a, a)

    def test_reduce_axis_range(self):
        """
        Test that reduction axes must exist
        """
        t = Tensor(np.ones((2, 3)))
        np.testing.assert_array_equal(t.sum(axis=1).data, [3.0, 3.0])
        self.assertAlmostEqual(t.mean().item(), 1.0)
        np.testing.assert_array_equal(T.reduce('mean', t, axis=0).data, [1.0, 1.0, 1.0])
        with self.assertRaises(ShapeError):
            T.reduce_sum(t, axis=2)
        with self.assertRaises(DomainError):
            T.reduce('max', t)

    def test_reshape_and_select(self):
        """
        Test reshape with an inferred extent and slice selection
        """
        t = Tensor(np.arange(6.0))
        r = t.reshape(2, -1)
        self.assertEqual(r.shape, (2, 3))
        np.testing.assert_array_equal(T.select(r, 1).data, [3.0, 4.0, 5.0])
        np.testing.assert_array_equal(T.select(r, 0, axis=1).data, [0.0, 3.0])
        with self.assertRaises(ShapeError):
            T.reshape(t, (4, 2))
        with self.assertRaises(ShapeError):
            T.select(r, 2)

    def test_log_softmax_stable(self):
        """
        Test that log_softmax handles large logits
        """
        out = T.log_softmax(Tensor([[1000.0, 1000.0]]))
        np.testing.assert_allclose(out.data, [[-np.log(2.0), -np.log(2.0)]])
        np.testing.assert_allclose(T.softmax(np.array([0.0, np.log(3.0)])), [0.25, 0.75])

    def test_cross_entropy(self):
        """
        Test cross-entropy against the direct formula
        """
        logits = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
        loss = T.cross_entropy(Tensor(logits), [2, 0])
        expected = -np.mean([np.log(T.softmax(logits[0])[2]), np.log(1.0 / 3.0)])
        self.assertAlmostEqual(loss.item(), expected, places=12)
        total = T.cross_entropy(Tensor(logits), [2, 0], reduction='sum')
        self.assertAlmostEqual(total.item(), 2 * expected, places=12)


class TestBackward(unittest.TestCase):
    """
    Tests for gradient propagation
    """

    def test_simple_gradient(self):
        """
        Test d/dx of sum(x * x + 3x)
        """
        x = parameter([1.0, -2.0])
        loss = T.reduce_sum(x * x + 3.0 * x)
        backward(loss)
        np.testing.assert_array_equal(x.grad, [5.0, -1.0])

    def test_shared_subexpression(self):
        """
        Test that a node used twice receives both contributions
        """
        x = parameter(2.0)
        y = T.exp(x)
        loss = y * y
        backward(loss)
        self.assertAlmostEqual(float(x.grad), 2.0 * np.exp(4.0))

    def test_backward_needs_scalar(self):
        """
        Test that backward rejects non-scalar and constant losses
        """
        x = parameter([1.0, 2.0])
        with self.assertRaises(ShapeError):
            backward(x * 2.0)
        with self.assertRaises(DomainError):
            backward(Tensor(1.0))

    def test_constants_get_no_gradient(self):
        """
        Test that constants never join the tape
        """
        c = Tensor([1.0, 2.0])
        x = parameter([3.0, 4.0])
        tape = backward(T.reduce_sum(T.mul(c, x)))
        self.assertIsNone(c.grad)
        np.testing.assert_array_equal(x.grad, [1.0, 2.0])
        self.assertEqual(len(tape), 3)

    def test_broadcast_to_gradient_sums(self):
        """
        Test that broadcast_to sums the gradient over expanded axes
        """
        b = parameter([1.0, 2.0, 3.0])
        backward(T.reduce_sum(T.broadcast_to(b, (4, 3))))
        np.testing.assert_array_equal(b.grad, [4.0, 4.0, 4.0])

    def test_concat_gradient_splits(self):
        """
        Test that concat routes gradients back to each part
        """
        a = parameter(np.ones((2, 1)))
        b = parameter(np.ones((2, 2)))
        out = T.concat([a, b], axis=1)
        backward(T.reduce_sum(T.mul(out, np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))))
        np.testing.assert_array_equal(a.grad, [[1.0], [4.0]])
        np.testing.assert_array_equal(b.grad, [[2.0, 3.0], [5.0, 6.0]])


class TestOpGradients(unittest.TestCase):
    """
    Finite-difference checks of every differentiable operation
    """

    OPS = {
        'add': lambda x: T.add(x, Tensor(np.full(x.shape, 0.3))),
        'sub': lambda x: T.sub(Tensor(np.full(x.shape, 0.3)), x),
        'mul': lambda x: T.mul(x, x),
        'neg': T.neg,
        'exp': T.exp,
        'tanh': T.tanh,
        'sigmoid': T.sigmoid,
        'log_softmax': T.log_softmax,
        'reshape': lambda x: T.reshape(x, (-1,)),
        'sum_axis': lambda x: T.reduce_sum(x, axis=0),
        'mean_axis': lambda x: T.reduce_mean(x, axis=1),
        'select': lambda x: T.select(x, 1, axis=1),
        'matmul': lambda x: T.matmul(x, Tensor(np.arange(6.0).reshape(3, 2) / 6.0)),
    }

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_ops_match_finite_differences(self, seed):
        """
        Test every operation at random points in [-2, 2]
        """
        x = Tensor(np.random.default_rng(seed).uniform(-2.0, 2.0, size=(2, 3)))
        for name, op in self.OPS.items():
            error = grad_check(lambda t, op=op: weighted_sum(op(t)), x)
            self.assertLessEqual(error, 1e-4, name)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_log_and_relu(self, seed):
        """
        Test log on positive inputs and relu away from its kink
        """
        rng = np.random.default_rng(seed)
        positive = Tensor(rng.uniform(0.2, 2.0, size=(2, 3)))
        self.assertLessEqual(grad_check(lambda t: weighted_sum(T.log(t)), positive), 1e-4)
        signs = rng.choice([-1.0, 1.0], size=(2, 3))
        away = Tensor(signs * rng.uniform(0.05, 2.0, size=(2, 3)))
        self.assertLessEqual(grad_check(lambda t: weighted_sum(T.relu(t)), away), 1e-4)

    def test_cross_entropy_gradient(self):
        """
        Test the cross-entropy gradient
        """
        x = Tensor(np.random.default_rng(3).uniform(-2.0, 2.0, size=(4, 3)))
        self.assertLessEqual(grad_check(lambda t: T.cross_entropy(t, [0, 1, 2, 1]), x), 1e-4)


if __name__ == '__main__':
    unittest.main()
