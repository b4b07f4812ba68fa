#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Fusion Baselines

Two reference group classifiers trained with the same harness as the flow:
concatenation of the member features followed by softmax, and averaging of
per-face softmax scores over the valid members.
"""

import logging
from collections import OrderedDict
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.errors import ConfigError
from src.grouping.grouping import GroupedFeature
from src.numeric_core.tensor import (
    Tensor,
    add,
    broadcast_to,
    cross_entropy,
    log_softmax,
    matmul,
    mul,
    parameter,
    reshape,
    softmax,
)
from src.nvpf.flow import stack_batch
from src.synthdata.labels import GROUP_CLASSES, class_indices

logger = logging.getLogger(__name__)

BASELINES = ("concat", "average")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class ConcatSoftmaxBaseline:
    """
    Softmax regression on the flattened (masked) group matrix
    """

    kind = "concat"

    def __init__(self, rows: int, cols: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.rows, self.cols = rows, cols
        self.params: Dict[str, Tensor] = OrderedDict([
            ("weight", parameter(_glorot(rng, rows * cols, len(GROUP_CLASSES)))),
            ("bias", parameter(np.zeros(len(GROUP_CLASSES)))),
        ])

    def parameters(self) -> "OrderedDict[str, Tensor]":
        return OrderedDict(self.params)

    def logits(self, groups: Sequence[GroupedFeature]) -> Tensor:
        S, mask = stack_batch(groups)
        batch = S.shape[0]
        flat = reshape(mul(S, np.repeat(mask[:, None, :], self.rows, axis=1).astype(float)), (batch, -1))
        out = matmul(flat, self.params["weight"])
        return add(out, broadcast_to(self.params["bias"], out.shape))

    def loss(self, batch: Sequence[Tuple[GroupedFeature, str]]) -> Tensor:
        return cross_entropy(self.logits([g for g, _ in batch]), class_indices(label for _, label in batch))

    def predict(self, groups: Sequence[GroupedFeature]) -> Tuple[List[str], np.ndarray]:
        scores = log_softmax(self.logits(groups)).data
        return [GROUP_CLASSES[i] for i in np.argmax(scores, axis=1)], scores


class AverageScoreBaseline:
    """
    A per-face softmax classifier whose probabilities are averaged over the
    valid members of a group

    Training gives every member its group's label.
    """

    kind = "average"

    def __init__(self, rows: int, cols: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.rows, self.cols = rows, cols
        self.params: Dict[str, Tensor] = OrderedDict([
            ("weight", parameter(_glorot(rng, rows, len(GROUP_CLASSES)))),
            ("bias", parameter(np.zeros(len(GROUP_CLASSES)))),
        ])

    def parameters(self) -> "OrderedDict[str, Tensor]":
        return OrderedDict(self.params)

    def _face_logits(self, groups: Sequence[GroupedFeature]) -> Tuple[Tensor, np.ndarray]:
        S, mask = stack_batch(groups)
        batch = S.shape[0]
        # one face per row: (B·N)×M
        faces = np.swapaxes(S.data, 1, 2).reshape(batch * self.cols, self.rows)
        out = matmul(Tensor(faces), self.params["weight"])
        return add(out, broadcast_to(self.params["bias"], out.shape)), mask.reshape(-1)

    def loss(self, batch: Sequence[Tuple[GroupedFeature, str]]) -> Tensor:
        logits, valid = self._face_logits([g for g, _ in batch])
        targets = np.repeat(class_indices(label for _, label in batch), self.cols)
        weights = valid.astype(float) / valid.sum()
        one_hot = np.eye(len(GROUP_CLASSES))[targets] * weights[:, None]
        return -reshape(mul(log_softmax(logits), one_hot).sum(), ())

    def predict(self, groups: Sequence[GroupedFeature]) -> Tuple[List[str], np.ndarray]:
        logits, valid = self._face_logits(groups)
        probs = softmax(logits.data) * valid[:, None]
        probs = probs.reshape(len(groups), self.cols, -1).sum(axis=1)
        probs /= probs.sum(axis=1, keepdims=True)
        scores = np.log(probs)
        return [GROUP_CLASSES[i] for i in np.argmax(scores, axis=1)], scores


def create_baseline(kind: str, rows: int, cols: int, seed: int = 0):
    """
    Build a baseline by name

    Args:
        kind: ``concat`` or ``average``
        rows: Feature length M
        cols: Column count N_max
        seed: Weight seed
    """
    if kind == "concat":
        return ConcatSoftmaxBaseline(rows, cols, seed)
    if kind == "average":
        return AverageScoreBaseline(rows, cols, seed)
    raise ConfigError(f"unknown baseline {kind!r}; expected one of {BASELINES}")
