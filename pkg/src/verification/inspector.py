#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Plain-text traces of model internals

Lines have a fixed order and fixed number formatting so two traces of the
same model and sample can be diffed.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from src.emonet.emonet import EmoNetConfig, param_count, shape_chain
from src.grouping.grouping import GroupedFeature
from src.nvpf.flow import FlowModel, classify_group, head_log_probs, unit_log_dets
from src.synthdata.labels import GROUP_CLASSES
from src.tnvpf.temporal import FrameSequence, TemporalModel, sequence_logits

logger = logging.getLogger(__name__)


def _number(value: float) -> str:
    # -0.0 and 0.0 print the same
    return f"{float(value) + 0.0:.6f}"


def _vector(values: Sequence[float]) -> str:
    return " ".join(_number(v) for v in values)


def inspect_flow(model: FlowModel, group: GroupedFeature) -> str:
    """
    Per-unit log-determinants and per-class scores of one group

    Args:
        model: The flow
        group: Grouped feature to trace

    Returns:
        The trace
    """
    lines = [f"flow {model.shape[0]}x{model.shape[1]} units={len(model.units)} "
             f"classifier={model.config.classifier}",
             f"valid_faces {group.valid_count}"]
    contributions = unit_log_dets(group, model)
    for k, value in enumerate(contributions):
        lines.append(f"unit {k} log_det {_number(value)}")
    lines.append(f"total log_det {_number(sum(contributions))}")
    label, scores = classify_group(group, model)
    for c in GROUP_CLASSES:
        lines.append(f"class {c} log_likelihood {_number(scores[c])}")
    if model.config.classifier == "softmax":
        for c, value in head_log_probs(group, model).items():
            lines.append(f"class {c} head_log_prob {_number(value)}")
    lines.append(f"predicted {label}")
    return "\n".join(lines) + "\n"


def inspect_sequence(model: TemporalModel, seq: FrameSequence) -> str:
    """
    Per-frame logits and classes of one video

    Args:
        model: The temporal model
        seq: Sequence to trace

    Returns:
        The trace, starting with the group-level trace of the first group
    """
    lines = [f"temporal cell={model.config.cell} hidden={model.config.hidden} "
             f"aggregation={model.config.aggregation} frames={seq.length}"]
    step_logits = [logits.data[0] for logits in sequence_logits([seq], model)]
    for t, logits in enumerate(step_logits):
        predicted = GROUP_CLASSES[int(np.argmax(logits))]
        lines.append(f"frame {t} label {seq.labels[t]} logits {_vector(logits)} predicted {predicted}")
    aggregate = step_logits[-1] if model.config.aggregation == "final" else np.mean(step_logits, axis=0)
    lines.append(f"video label {seq.video_label} predicted {GROUP_CLASSES[int(np.argmax(aggregate))]}")
    return inspect_flow(model.group_flow, seq.frames[0][0]) + "\n".join(lines) + "\n"


def inspect_emonet(cfg: EmoNetConfig) -> str:
    """Shape chain and parameter count of an extractor configuration"""
    lines: List[str] = []
    for name, shape_in, shape_out in shape_chain(cfg):
        lines.append(f"{name} {_shape(shape_in)} -> {_shape(shape_out)}")
    count = param_count(cfg)
    lines.append(f"parameters {count}")
    lines.append(f"size_bytes {count * 4}")
    return "\n".join(lines) + "\n"


def _shape(shape: Tuple[int, ...]) -> str:
    return "x".join(str(extent) for extent in shape)
