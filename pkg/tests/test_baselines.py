#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the concatenation and score-averaging baselines
"""

import os
import sys
import unittest

import numpy as np

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import ConfigError
from src.grouping.grouping import GroupedFeature
from src.numeric_core.gradcheck import grad_check
from src.numeric_core.tensor import Tensor, backward, softmax
from src.numeric_core.optim import Adam
from src.nvpf.baselines import AverageScoreBaseline, ConcatSoftmaxBaseline, create_baseline


def group(S, mask):
    return GroupedFeature(S=Tensor(np.asarray(S, dtype=float)), mask=np.asarray(mask, dtype=bool))


class TestBaselines(unittest.TestCase):
    """
    Tests for both baselines
    """

    def setUp(self):
        """
        Set up the test
        """
        rng = np.random.default_rng(0)
        self.groups = [group(rng.normal(size=(3, 4)), [True, True, i % 2 == 0, False]) for i in range(4)]
        self.labels = ['positive', 'negative', 'neutral', 'negative']

    def test_create(self):
        """
        Test construction by name
        """
        self.assertIsInstance(create_baseline('concat', 3, 4), ConcatSoftmaxBaseline)
        self.assertIsInstance(create_baseline('average', 3, 4), AverageScoreBaseline)
        with self.assertRaises(ConfigError):
            create_baseline('vote', 3, 4)

    def test_padded_columns_ignored(self):
        """
        Test that values in padded columns never affect predictions
        """
        noisy = [group(np.where(g.mask, g.S.data, 99.0), g.mask) for g in self.groups]
        for kind in ('concat', 'average'):
            model = create_baseline(kind, 3, 4, seed=1)
            clean_labels, clean_scores = model.predict(self.groups)
            noisy_labels, noisy_scores = model.predict(noisy)
            self.assertEqual(clean_labels, noisy_labels)
            np.testing.assert_allclose(clean_scores, noisy_scores, atol=1e-12)
            np.testing.assert_allclose(np.exp(clean_scores).sum(axis=1), np.ones(4))

    def test_average_loss_over_valid_faces(self):
        """
        Test the averaging baseline loss as the mean face cross-entropy
        """
        model = AverageScoreBaseline(3, 4, seed=2)
        W, b = model.params['weight'].data, model.params['bias'].data
        losses = []
        for g, label in zip(self.groups, self.labels):
            target = ('positive', 'negative', 'neutral').index(label)
            for j in np.flatnonzero(g.mask):
                losses.append(-np.log(softmax(g.S.data[:, j] @ W + b)[target]))
        self.assertAlmostEqual(model.loss(list(zip(self.groups, self.labels))).item(), np.mean(losses), places=10)

    def test_average_prediction_averages_probabilities(self):
        """
        Test that group scores are the log of the mean member probability
        """
        model = AverageScoreBaseline(3, 4, seed=3)
        W, b = model.params['weight'].data, model.params['bias'].data
        g = self.groups[1]
        probs = np.mean([softmax(g.S.data[:, j] @ W + b) for j in np.flatnonzero(g.mask)], axis=0)
        _, scores = model.predict([g])
        np.testing.assert_allclose(scores[0], np.log(probs), atol=1e-12)

    def test_concat_gradient(self):
        """
        Test the concatenation baseline gradient
        """
        model = ConcatSoftmaxBaseline(3, 4, seed=4)
        batch = list(zip(self.groups, self.labels))

        def loss(w):
            model.params['weight'] = w
            return model.loss(batch)

        original = model.params['weight']
        self.assertLessEqual(grad_check(loss, original), 1e-4)

    def test_training_reduces_loss(self):
        """
        Test that a few Adam steps lower the training loss
        """
        batch = list(zip(self.groups, self.labels))
        for kind in ('concat', 'average'):
            model = create_baseline(kind, 3, 4, seed=5)
            optimizer = Adam(model.parameters(), lr=0.05)
            before = model.loss(batch).item()
            for _ in range(20):
                optimizer.zero_grad()
                backward(model.loss(batch))
                optimizer.step()
            self.assertLess(model.loss(batch).item(), before, kind)


if __name__ == '__main__':
    unittest.main()
