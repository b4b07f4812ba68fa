#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for face grouping and group stacking
"""

import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import DomainError, ShapeError
from src.grouping.grouping import FaceBox, cluster_faces, group_boxes, kmeans, stack_group
from src.numeric_core import tensor as T
from src.numeric_core.tensor import Tensor, backward, parameter


def box(x, y, feature, w=100.0, h=100.0, label='Happy'):
    return FaceBox(center=(x, y), size=(w, h), feature=Tensor(np.asarray(feature, dtype=float)), face_label=label)


class TestKMeans(unittest.TestCase):
    """
    Tests for kmeans and cluster_faces
    """

    def test_separated_clusters(self):
        """
        Test that well separated blobs are recovered
        """
        rng = np.random.default_rng(0)
        points = np.concatenate([rng.normal(0, 1, (10, 2)), rng.normal(100, 1, (10, 2))])
        result = kmeans(points, 2, seed=0)
        self.assertEqual(len(set(result.assignment[:10])), 1)
        self.assertEqual(len(set(result.assignment[10:])), 1)
        self.assertNotEqual(result.assignment[0], result.assignment[10])

    def test_sse_non_increasing(self):
        """
        Test that the objective never increases between iterations
        """
        points = np.random.default_rng(1).uniform(0, 10, (40, 2))
        history = kmeans(points, 4, seed=3).sse_history
        for before, after in zip(history, history[1:]):
            self.assertLessEqual(after, before + 1e-9)

    def test_k_clamped(self):
        """
        Test that K larger than the number of points is clamped
        """
        points = np.array([[0.0, 0.0], [5.0, 5.0]])
        with self.assertLogs('src.grouping.grouping', level='WARNING'):
            result = kmeans(points, 10, seed=0)
        self.assertEqual(sorted(result.assignment.tolist()), [0, 1])

    def test_single_point(self):
        """
        Test the single-box case
        """
        self.assertEqual(cluster_faces([box(3.0, 4.0, [1.0, 2.0])], K=10), [0])

    def test_argument_checks(self):
        """
        Test empty input and non-positive K
        """
        with self.assertRaises(ShapeError):
            kmeans(np.zeros((0, 2)), 1)
        with self.assertRaises(DomainError):
            kmeans(np.zeros((3, 2)), 0)
        with self.assertRaises(DomainError):
            cluster_faces([])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10 ** 6))
    def test_permutation_equivariant(self, seed):
        """
        Test that permuting the boxes permutes the assignment identically
        """
        rng = np.random.default_rng(seed)
        points = rng.uniform(0, 1000, (12, 2))
        perm = rng.permutation(12)
        base = kmeans(points, 3, seed=5).assignment
        permuted = kmeans(points[perm], 3, seed=5).assignment
        np.testing.assert_array_equal(permuted, base[perm])


class TestStackGroup(unittest.TestCase):
    """
    Tests for stack_group and group_boxes
    """

    def test_columns_sorted_and_padded(self):
        """
        Test column order by x and zero padding with a mask
        """
        members = [box(300.0, 0.0, [3.0, 3.0]), box(100.0, 0.0, [1.0, 1.0]), box(200.0, 0.0, [2.0, 2.0])]
        group = stack_group(members, N_max=4)
        np.testing.assert_array_equal(group.S.data, [[1.0, 2.0, 3.0, 0.0], [1.0, 2.0, 3.0, 0.0]])
        np.testing.assert_array_equal(group.mask, [True, True, True, False])
        self.assertEqual(group.valid_count, 3)
        self.assertEqual(group.members, [1, 2, 0])

    def test_largest_faces_kept(self):
        """
        Test that only the N_max largest boxes survive
        """
        members = [box(float(i), 0.0, [float(i)], w=10.0 * (i + 1)) for i in range(5)]
        group = stack_group(members, N_max=2)
        np.testing.assert_array_equal(group.S.data, [[3.0, 4.0]])
        self.assertTrue(group.mask.all())

    def test_gradient_reaches_features(self):
        """
        Test that stacking keeps member features on the tape
        """
        feature = parameter([1.0, 2.0])
        member = FaceBox(center=(0.0, 0.0), size=(10.0, 10.0), feature=feature, face_label='Sad')
        group = stack_group([member], N_max=3)
        backward(T.reduce_sum(T.mul(group.S, group.S)))
        np.testing.assert_array_equal(feature.grad, [2.0, 4.0])

    def test_inconsistent_features(self):
        """
        Test that mixed feature lengths are rejected
        """
        with self.assertRaises(ShapeError):
            stack_group([box(0.0, 0.0, [1.0]), box(1.0, 0.0, [1.0, 2.0])])
        with self.assertRaises(DomainError):
            stack_group([])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10 ** 6))
    def test_member_order_irrelevant(self, seed):
        """
        Test that the stacked matrix does not depend on member order
        """
        rng = np.random.default_rng(seed)
        members = [box(float(x), float(y), rng.normal(size=3)) for x, y in rng.uniform(0, 500, (5, 2))]
        perm = rng.permutation(5)
        a = stack_group(members, N_max=6).S.data
        b = stack_group([members[i] for i in perm], N_max=6).S.data
        np.testing.assert_array_equal(a, b)

    def test_group_boxes(self):
        """
        Test that an assignment splits boxes into member lists
        """
        boxes = [box(0.0, 0.0, [1.0]), box(1.0, 0.0, [2.0]), box(2.0, 0.0, [3.0])]
        groups = group_boxes(boxes, [1, 0, 1])
        self.assertEqual([[b.feature.item() for b in g] for g in groups], [[2.0], [1.0, 3.0]])
        with self.assertRaises(ShapeError):
            group_boxes(boxes, [0])


if __name__ == '__main__':
    unittest.main()
