#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Non-Volume Preserving Fusion Flow

This module composes coupling units into the fusion flow F mapping a stacked
group matrix S to a fused feature H with an exact log-determinant, scores H
under class-conditional diagonal Gaussian priors, and provides the training
loss and the group classifier.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigError, ShapeError
from src.grouping.grouping import GroupedFeature
from src.numeric_core.tensor import (
    Tensor,
    add,
    as_tensor,
    broadcast_to,
    concat,
    cross_entropy,
    log_softmax,
    matmul,
    mul,
    neg,
    parameter,
    reduce_mean,
    reduce_sum,
    reshape,
    select,
    sub,
)
from src.nvpf.coupling import (
    CouplingUnit,
    alternating_masks,
    coupling_forward,
    coupling_inverse,
    init_coupling_unit,
    valid_cells,
)
from src.synthdata.labels import GROUP_CLASSES, class_index, class_indices

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
CLASSIFIERS = ("likelihood", "softmax")


@dataclass
class FlowConfig:
    """
    Architecture and prior settings of a fusion flow
    """

    rows: int
    cols: int
    units: int = 10
    filters: int = 32
    residual_blocks: int = 2
    scale_bound: float = 2.0
    classifier: str = "likelihood"
    prior_offset: float = 3.0
    prior_std: float = 1.0

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols < 2:
            raise ConfigError(f"flow grid must have at least two cells, got {self.rows}×{self.cols}")
        if self.units < 1:
            raise ConfigError("flow needs at least one unit")
        if self.filters < 1 or self.residual_blocks < 0:
            raise ConfigError("filters must be positive and residual_blocks non-negative")
        if self.scale_bound <= 0:
            raise ConfigError("scale_bound must be positive")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if not self.prior_std > 0:
            raise ConfigError("prior_std must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FlowConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown flow settings: {sorted(unknown)}")
        try:
            config = cls(**data)
        except TypeError as e:
            raise ConfigError(f"invalid flow settings: {e}") from None
        config.validate()
        return config


@dataclass
class FusedFeature:
    """
    Flow output H with its accumulated log-determinant and the source mask
    """

    H: Tensor
    log_det: Tensor
    mask: np.ndarray


def default_priors(rows: int, cols: int, offset: float = 3.0,
                   std: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Class prior means and standard deviations

    Each class mean is ``offset`` on its own third of the cells (in row-major
    order) and zero elsewhere.

    Returns:
        (means, stds), each C×M×N
    """
    means = np.zeros((len(GROUP_CLASSES), rows * cols))
    for c, cells in enumerate(np.array_split(np.arange(rows * cols), len(GROUP_CLASSES))):
        means[c, cells] = offset
    stds = np.full(means.shape, float(std))
    return means.reshape(-1, rows, cols), stds.reshape(-1, rows, cols)


class FlowModel:
    """
    Ordered coupling units, class priors and an optional softmax head
    """

    def __init__(self, config: FlowConfig, units: List[CouplingUnit],
                 prior_means: np.ndarray, prior_stds: np.ndarray, head: Dict[str, Tensor]):
        self.config = config
        self.units = units
        self.prior_means = np.asarray(prior_means, dtype=float)
        self.prior_stds = np.asarray(prior_stds, dtype=float)
        self.head = head
        self._check()

    def _check(self) -> None:
        shape = (len(GROUP_CLASSES), self.config.rows, self.config.cols)
        if self.prior_means.shape != shape or self.prior_stds.shape != shape:
            raise ShapeError(f"class priors must have shape {shape}")
        if not np.all(np.isfinite(self.prior_stds)) or np.any(self.prior_stds <= 0):
            raise ConfigError("prior standard deviations must be finite and positive")

    @classmethod
    def create(cls, config: FlowConfig, seed: int = 0, identity: bool = True) -> "FlowModel":
        """
        Build a flow with fresh parameters

        Args:
            config: Flow configuration
            seed: Seed for the subnetwork weights
            identity: Zero the subnetwork outputs so every unit starts as identity

        Returns:
            The model
        """
        config.validate()
        rng = np.random.default_rng(seed)
        units = [
            init_coupling_unit(mask, config.filters, config.residual_blocks, rng,
                               zero_output=identity, scale_bound=config.scale_bound)
            for mask in alternating_masks(config.rows, config.cols, config.units)
        ]
        means, stds = default_priors(config.rows, config.cols, config.prior_offset, config.prior_std)
        head = OrderedDict([
            ("weight", parameter(np.zeros((config.rows * config.cols, len(GROUP_CLASSES))))),
            ("bias", parameter(np.zeros(len(GROUP_CLASSES)))),
        ])
        logger.debug("created %d-unit flow on a %d×%d grid", config.units, config.rows, config.cols)
        return cls(config, units, means, stds, head)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.config.rows, self.config.cols)

    def parameters(self) -> "OrderedDict[str, Tensor]":
        params: "OrderedDict[str, Tensor]" = OrderedDict()
        for k, unit in enumerate(self.units):
            for name, value in unit.params.items():
                params[f"unit{k}.{name}"] = value
        for name, value in self.head.items():
            params[f"head.{name}"] = value
        return params

    def set_priors(self, means: np.ndarray, stds: np.ndarray) -> None:
        self.prior_means = np.asarray(means, dtype=float)
        self.prior_stds = np.asarray(stds, dtype=float)
        self._check()

    def with_parameter(self, name: str, value: Tensor) -> "FlowModel":
        """
        Shallow copy of the model with one parameter replaced

        Raises:
            KeyError: If no parameter has that name
        """
        if name not in self.parameters():
            raise KeyError(name)
        units = []
        for k, unit in enumerate(self.units):
            params = OrderedDict(
                (key, value if f"unit{k}.{key}" == name else tensor) for key, tensor in unit.params.items()
            )
            units.append(CouplingUnit(unit.mask, params, unit.residual_blocks, unit.scale_bound))
        head = OrderedDict((key, value if f"head.{key}" == name else tensor) for key, tensor in self.head.items())
        return FlowModel(self.config, units, self.prior_means, self.prior_stds, head)

    def load_parameters(self, arrays: Dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place from named arrays"""
        for name, tensor in self.parameters().items():
            if name not in arrays:
                raise KeyError(f"missing parameter {name}")
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise ShapeError(f"parameter {name}: expected {tensor.shape}, got {value.shape}")
            tensor.data = value.copy()


# Batched forward


def stack_batch(groups: Sequence[GroupedFeature]) -> Tuple[Tensor, np.ndarray]:
    """
    Stack grouped features into a B×M×N tensor and a B×N column mask
    """
    if not groups:
        raise ShapeError("empty batch")
    shape = groups[0].S.shape
    for group in groups:
        if group.S.shape != shape:
            raise ShapeError(f"group shapes differ in batch: {shape} vs {group.S.shape}")
    S = concat([reshape(group.S, (1,) + shape) for group in groups], axis=0)
    return S, np.stack([np.asarray(group.mask, dtype=bool) for group in groups])


def flow_forward_batch(S: Tensor, column_mask: Optional[np.ndarray], model: FlowModel) -> Tuple[Tensor, Tensor]:
    """
    Apply every unit in order to a batch

    Args:
        S: B×M×N input
        column_mask: B×N valid columns, or None for all valid
        model: The flow

    Returns:
        (H, log_det) with H B×M×N and log_det of length B
    """
    S = as_tensor(S)
    if S.ndim != 3 or S.shape[1:] != model.shape:
        raise ShapeError(f"flow expects B×{model.shape[0]}×{model.shape[1]} input, got {S.shape}")
    H, total = S, None
    for unit in model.units:
        H, log_det = coupling_forward(H, unit, column_mask)
        total = log_det if total is None else add(total, log_det)
    return H, total


def flow_forward(S: GroupedFeature, model: FlowModel) -> FusedFeature:
    """
    Fuse one group

    Args:
        S: Grouped feature with an M×N matrix matching the flow
        model: The flow

    Returns:
        The fused feature carrying the source mask unchanged
    """
    if S.S.shape != model.shape:
        raise ShapeError(f"group matrix {S.S.shape} does not match flow grid {model.shape}")
    batch = reshape(S.S, (1,) + model.shape)
    H, log_det = flow_forward_batch(batch, np.asarray(S.mask)[None], model)
    return FusedFeature(H=reshape(H, model.shape), log_det=reshape(log_det, ()), mask=np.asarray(S.mask, dtype=bool))


def flow_inverse(H: Tensor, model: FlowModel, column_mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Map a fused feature back to the group matrix by inverting every unit in
    reverse order
    """
    S = as_tensor(H)
    for unit in reversed(model.units):
        S = coupling_inverse(S, unit, column_mask)
    return S


def unit_log_dets(S: GroupedFeature, model: FlowModel) -> List[float]:
    """Log-determinant contributed by each unit, in order"""
    H = reshape(S.S, (1,) + model.shape)
    mask = np.asarray(S.mask)[None]
    contributions = []
    for unit in model.units:
        H, log_det = coupling_forward(H, unit, mask)
        contributions.append(float(log_det.data[0]))
    return contributions


# Likelihood and classification


def batch_log_likelihoods(H: Tensor, log_det: Tensor, column_mask: Optional[np.ndarray], model: FlowModel) -> Tensor:
    """
    Per-class log-likelihood of each sample, summed over valid cells

    Args:
        H: B×M×N fused features
        log_det: B accumulated log-determinants
        column_mask: B×N valid columns
        model: Supplies the class priors

    Returns:
        B×C log-likelihoods in the fixed class order
    """
    batch = H.shape[0]
    valid = valid_cells(column_mask, batch, *model.shape)
    columns = []
    for c in range(len(GROUP_CLASSES)):
        mu = np.broadcast_to(model.prior_means[c], H.shape)
        sigma = np.broadcast_to(model.prior_stds[c], H.shape)
        diff = sub(H, mu)
        quadratic = mul(mul(diff, diff), valid / (2.0 * sigma ** 2))
        constant = -(valid * (0.5 * LOG_2PI + np.log(sigma))).reshape(batch, -1).sum(axis=1)
        gaussian = sub(constant, reduce_sum(reshape(quadratic, (batch, -1)), axis=1))
        columns.append(reshape(add(gaussian, log_det), (batch, 1)))
    return concat(columns, axis=1)


def class_log_likelihood(h: FusedFeature, c: str, model: FlowModel) -> Tensor:
    """
    Log-density of the group under class ``c``: Gaussian prior on H plus the
    flow's log-determinant, over valid cells only

    Raises:
        UnknownClassError: If ``c`` is not a group class
    """
    index = class_index(c)
    H = reshape(h.H, (1,) + model.shape)
    log_det = reshape(h.log_det, (1,))
    scores = batch_log_likelihoods(H, log_det, np.asarray(h.mask)[None], model)
    return select(reshape(scores, (len(GROUP_CLASSES),)), index)


def head_logits(H: Tensor, column_mask: Optional[np.ndarray], model: FlowModel) -> Tensor:
    """Softmax-head logits on flattened B×M×N features, padded cells zeroed"""
    batch = H.shape[0]
    valid = valid_cells(column_mask, batch, *model.shape)
    flat = reshape(mul(H, valid), (batch, -1))
    logits = matmul(flat, model.head["weight"])
    return add(logits, broadcast_to(model.head["bias"], logits.shape))


def nvpf_loss(batch: Sequence[Tuple[GroupedFeature, str]], model: FlowModel) -> Tensor:
    """
    Mean negative class log-likelihood over a labelled batch

    With the softmax classifier the head's cross-entropy on H is added.

    Args:
        batch: (grouped feature, group label) pairs
        model: The flow

    Returns:
        Scalar loss
    """
    if not batch:
        raise ShapeError("nvpf_loss needs a non-empty batch")
    groups = [group for group, _ in batch]
    targets = class_indices(label for _, label in batch)
    S, mask = stack_batch(groups)
    H, log_det = flow_forward_batch(S, mask, model)
    scores = batch_log_likelihoods(H, log_det, mask, model)
    one_hot = np.eye(len(GROUP_CLASSES))[targets]
    loss = neg(reduce_mean(reduce_sum(mul(scores, one_hot), axis=1)))
    if model.config.classifier == "softmax":
        loss = add(loss, cross_entropy(head_logits(H, mask, model), targets))
    return loss


def predict_batch(groups: Sequence[GroupedFeature], model: FlowModel) -> Tuple[List[str], np.ndarray]:
    """
    Classify many groups at once

    The softmax classifier decides by the head's logits; the returned
    scores are the class log-likelihoods either way.

    Returns:
        (predicted labels, B×C log-likelihoods)
    """
    S, mask = stack_batch(groups)
    H, log_det = flow_forward_batch(S.detach(), mask, model)
    scores = batch_log_likelihoods(H, log_det, mask, model).data
    if model.config.classifier == "softmax":
        decision = head_logits(H, mask, model).data
    else:
        decision = scores
    return [GROUP_CLASSES[i] for i in np.argmax(decision, axis=1)], scores


def head_log_probs(S: GroupedFeature, model: FlowModel) -> Dict[str, float]:
    """Softmax head log-probabilities of one group"""
    batch, mask = stack_batch([S])
    H, _ = flow_forward_batch(batch.detach(), mask, model)
    log_probs = log_softmax(head_logits(H, mask, model)).data[0]
    return {c: float(log_probs[i]) for i, c in enumerate(GROUP_CLASSES)}


def classify_group(S: GroupedFeature, model: FlowModel) -> Tuple[str, Dict[str, float]]:
    """
    Pick the class with the highest log-likelihood (or head logit with the
    softmax classifier); ties go to the earlier class in the fixed order

    Returns:
        (label, per-class log-likelihoods)
    """
    labels, scores = predict_batch([S], model)
    return labels[0], {c: float(scores[0, i]) for i, c in enumerate(GROUP_CLASSES)}
