#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Temporal Fusion

This module chains the per-frame pipeline (group-level flow on every group,
frame-level flow on the stacked group features) into a recurrent cell with a
softmax output per frame. It provides the sequence loss, video and frame
predictions and the per-frame-majority baseline.
"""

import logging
from collections import Counter, OrderedDict
from dataclasses import asdict, dataclass, fields
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigError, ShapeError
from src.grouping.grouping import GroupedFeature
from src.numeric_core.tensor import (
    Tensor,
    add,
    concat,
    cross_entropy,
    reshape,
    select,
)
from src.nvpf.flow import (
    FlowConfig,
    FlowModel,
    FusedFeature,
    flow_forward_batch,
    predict_batch,
    stack_batch,
)
from src.synthdata.labels import GROUP_CLASSES, class_index, class_indices
from src.tnvpf.gru import GruParams, frame_logits, gru_step, init_gru_params, initial_state
from src.tnvpf.reference_cells import (
    LstmParams,
    RnnParams,
    init_lstm_params,
    init_rnn_params,
    initial_cell_state,
    lstm_step,
    rnn_step,
)

logger = logging.getLogger(__name__)

AGGREGATIONS = ("final", "mean")


@dataclass
class _Cell:
    init: Callable[..., Any]
    step: Callable[..., Any]
    params_type: type
    zero_state: Callable[..., Any]


CELLS: Dict[str, _Cell] = {
    "gru": _Cell(init_gru_params, gru_step, GruParams, initial_state),
    "rnn": _Cell(init_rnn_params, rnn_step, RnnParams, lambda d_h, batch=None: initial_cell_state("rnn", d_h, batch)),
    "lstm": _Cell(init_lstm_params, lstm_step, LstmParams,
                  lambda d_h, batch=None: initial_cell_state("lstm", d_h, batch)),
}


@dataclass
class TemporalConfig:
    """
    Sizes of the temporal model

    feature_dim and max_faces fix the group grid (M×N_max); max_groups is the
    column count of the frame-level flow.
    """

    feature_dim: int = 8
    max_faces: int = 4
    max_groups: int = 4
    hidden: int = 64
    units: int = 10
    filters: int = 32
    residual_blocks: int = 2
    scale_bound: float = 2.0
    cell: str = "gru"
    aggregation: str = "final"

    @property
    def d_in(self) -> int:
        return self.feature_dim * self.max_faces * self.max_groups

    def validate(self) -> None:
        if min(self.feature_dim, self.max_faces, self.max_groups, self.hidden) < 1:
            raise ConfigError("temporal model sizes must be positive")
        if self.cell not in CELLS:
            raise ConfigError(f"cell must be one of {tuple(CELLS)}, got {self.cell!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")

    def group_flow_config(self) -> FlowConfig:
        return FlowConfig(rows=self.feature_dim, cols=self.max_faces, units=self.units, filters=self.filters,
                          residual_blocks=self.residual_blocks, scale_bound=self.scale_bound)

    def frame_flow_config(self) -> FlowConfig:
        return FlowConfig(rows=self.feature_dim * self.max_faces, cols=self.max_groups, units=self.units,
                          filters=self.filters, residual_blocks=self.residual_blocks, scale_bound=self.scale_bound)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TemporalConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown temporal settings: {sorted(unknown)}")
        config = cls(**data)
        config.validate()
        return config


@dataclass
class FrameSequence:
    """
    Groups of every frame with per-frame labels and the video label
    """

    frames: List[List[GroupedFeature]]
    labels: List[str]
    video_label: str
    video_id: str = ""

    def __post_init__(self):
        if not self.frames:
            raise ShapeError("a sequence needs at least one frame")
        if len(self.labels) != len(self.frames):
            raise ShapeError(f"{len(self.frames)} frames but {len(self.labels)} labels")
        class_indices(self.labels)
        class_index(self.video_label)

    @property
    def length(self) -> int:
        return len(self.frames)

    def crop(self, length: int) -> "FrameSequence":
        """The first ``length`` frames"""
        return FrameSequence(self.frames[:length], self.labels[:length], self.video_label, self.video_id)


class TemporalModel:
    """
    Group-level flow, frame-level flow and recurrent cell parameters
    """

    def __init__(self, config: TemporalConfig, group_flow: FlowModel, frame_flow: FlowModel, cell_params: Any):
        self.config = config
        self.group_flow = group_flow
        self.frame_flow = frame_flow
        self.cell_params = cell_params

    @classmethod
    def create(cls, config: TemporalConfig, seed: int = 0, identity: bool = True) -> "TemporalModel":
        config.validate()
        group_flow = FlowModel.create(config.group_flow_config(), seed, identity)
        frame_flow = FlowModel.create(config.frame_flow_config(), seed + 1, identity)
        cell_params = CELLS[config.cell].init(config.d_in, config.hidden, seed=seed + 2)
        return cls(config, group_flow, frame_flow, cell_params)

    def parameters(self) -> "OrderedDict[str, Tensor]":
        params: "OrderedDict[str, Tensor]" = OrderedDict()
        for name, value in self.group_flow.parameters().items():
            params[f"group_flow.{name}"] = value
        for name, value in self.frame_flow.parameters().items():
            params[f"frame_flow.{name}"] = value
        for name, value in self.cell_params.named().items():
            params[f"cell.{name}"] = value
        return params

    def with_parameter(self, name: str, value: Tensor) -> "TemporalModel":
        """Shallow copy with one parameter replaced"""
        scope, _, rest = name.partition(".")
        group_flow, frame_flow, cell_params = self.group_flow, self.frame_flow, self.cell_params
        if scope == "group_flow":
            group_flow = group_flow.with_parameter(rest, value)
        elif scope == "frame_flow":
            frame_flow = frame_flow.with_parameter(rest, value)
        elif scope == "cell" and rest in cell_params.named():
            named = cell_params.named()
            named[rest] = value
            cell_params = type(cell_params).from_named(named)
        else:
            raise KeyError(name)
        return TemporalModel(self.config, group_flow, frame_flow, cell_params)

    def load_parameters(self, arrays: Dict[str, np.ndarray]) -> None:
        for name, tensor in self.parameters().items():
            if name not in arrays:
                raise KeyError(f"missing parameter {name}")
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise ShapeError(f"parameter {name}: expected {tensor.shape}, got {value.shape}")
            tensor.data = value.copy()


# Frame features


def _frame_matrix(columns: List[Tensor], max_groups: int) -> Tuple[Tensor, np.ndarray]:
    if not columns:
        raise ShapeError("a frame needs at least one group")
    if len(columns) > max_groups:
        raise ShapeError(f"frame has {len(columns)} groups, more than max_groups={max_groups}")
    rows = columns[0].size
    parts = [reshape(column, (rows, 1)) for column in columns]
    if len(parts) < max_groups:
        parts.append(Tensor(np.zeros((rows, max_groups - len(parts)))))
    mask = np.zeros(max_groups, dtype=bool)
    mask[:len(columns)] = True
    return concat(parts, axis=1), mask


def frame_feature(groups: Sequence[FusedFeature], frame_flow: FlowModel) -> Tensor:
    """
    Fuse the group-level features of one frame into its frame feature

    Each group's H is flattened into one column of an (M·N_max)×G_max matrix,
    which the frame-level flow maps to H^t; the result is flattened.

    Args:
        groups: Fused features of the frame's groups
        frame_flow: Frame-level flow

    Returns:
        Vector of length M·N_max·G_max
    """
    matrix, mask = _frame_matrix([g.H for g in groups], frame_flow.config.cols)
    H, _ = flow_forward_batch(reshape(matrix, (1,) + matrix.shape), mask[None], frame_flow)
    return reshape(H, (H.size,))


def frame_features_batch(frames: Sequence[List[GroupedFeature]], model: TemporalModel) -> Tensor:
    """
    Frame features for a batch of frames (one per video)

    Returns:
        B×d_in tensor
    """
    flat = [group for frame in frames for group in frame]
    S, mask = stack_batch(flat)
    H_all, _ = flow_forward_batch(S, mask, model.group_flow)
    matrices, masks, offset = [], [], 0
    for frame in frames:
        columns = [select(H_all, offset + j) for j in range(len(frame))]
        offset += len(frame)
        matrix, frame_mask = _frame_matrix(columns, model.config.max_groups)
        matrices.append(reshape(matrix, (1,) + matrix.shape))
        masks.append(frame_mask)
    H, _ = flow_forward_batch(concat(matrices, axis=0), np.stack(masks), model.frame_flow)
    return reshape(H, (len(frames), -1))


# Sequences


def sequence_logits(seqs: Sequence[FrameSequence], model: TemporalModel) -> List[Tensor]:
    """
    Per-step logits for equal-length sequences

    Returns:
        One B×C tensor per time step
    """
    if not seqs:
        raise ShapeError("empty sequence batch")
    length = seqs[0].length
    if any(seq.length != length for seq in seqs):
        raise ShapeError("sequences in a batch must have equal length")
    cell = CELLS[model.config.cell]
    state = cell.zero_state(model.config.hidden, len(seqs))
    outputs = []
    for t in range(length):
        x = frame_features_batch([seq.frames[t] for seq in seqs], model)
        state = cell.step(x, state, model.cell_params)
        outputs.append(frame_logits(state, model.cell_params))
    return outputs


def batch_sequence_loss(seqs: Sequence[FrameSequence], model: TemporalModel) -> Tensor:
    """
    Mean over sequences of the summed per-frame cross-entropy
    """
    total = None
    for t, logits in enumerate(sequence_logits(seqs, model)):
        step = cross_entropy(logits, class_indices(seq.labels[t] for seq in seqs))
        total = step if total is None else add(total, step)
    return total


def sequence_loss(seq: FrameSequence, p: Any, flows: Tuple[FlowModel, FlowModel],
                  config: Optional[TemporalConfig] = None) -> Tensor:
    """
    Sum over frames of −log p(l_t | frames 1..t)

    Args:
        seq: Labelled sequence
        p: Cell parameters (GRU unless ``config`` names another cell)
        flows: (group-level flow, frame-level flow)
        config: Temporal configuration; derived from the flows when omitted

    Returns:
        Scalar loss
    """
    group_flow, frame_flow = flows
    if config is None:
        config = TemporalConfig(feature_dim=group_flow.config.rows, max_faces=group_flow.config.cols,
                                max_groups=frame_flow.config.cols, hidden=p.d_h)
    return batch_sequence_loss([seq], TemporalModel(config, group_flow, frame_flow, p))


def _aggregate(step_logits: List[np.ndarray], aggregation: str) -> np.ndarray:
    if aggregation == "mean":
        return np.mean(step_logits, axis=0)
    return step_logits[-1]


def predict_videos(seqs: Sequence[FrameSequence], model: TemporalModel) -> List[Tuple[str, List[str]]]:
    """
    Video and per-frame classes for equal-length sequences
    """
    step_logits = [logits.data for logits in sequence_logits(seqs, model)]
    video = np.argmax(_aggregate(step_logits, model.config.aggregation), axis=1)
    frames = np.argmax(np.stack(step_logits, axis=1), axis=2)
    return [
        (GROUP_CLASSES[video[b]], [GROUP_CLASSES[i] for i in frames[b]])
        for b in range(len(seqs))
    ]


def predict_video(seq: FrameSequence, model: TemporalModel) -> Tuple[str, List[str]]:
    """
    Classify a video and each of its frames

    The per-frame class is the argmax after each step; the video class comes
    from the final-step logits (or the mean of all steps with ``mean``
    aggregation). Ties go to the earlier class.
    """
    return predict_videos([seq], model)[0]


def _majority(labels: Sequence[str]) -> str:
    counts = Counter(labels)
    best = max(counts.values())
    return next(c for c in GROUP_CLASSES if counts.get(c, 0) == best)


def per_frame_majority(seq: FrameSequence, group_flow: FlowModel) -> Tuple[str, List[str]]:
    """
    Baseline without recurrence: each frame takes the majority of its groups'
    likelihood classes and the video the majority of its frames
    """
    frame_classes = [_majority(predict_batch(frame, group_flow)[0]) for frame in seq.frames]
    return _majority(frame_classes), frame_classes
