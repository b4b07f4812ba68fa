#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Model Evaluator for NVPF

This module scores predictions against ground truth: overall accuracy (mAC),
unweighted average recall over the classes present in the truth (UAR),
macro-averaged F1 over the classes seen in truth or predictions, per-class
accuracy and the confusion matrix (rows are true classes).
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

from src.errors import ShapeError, UnknownClassError
from src.nvpf.flow import FlowModel, predict_batch
from src.synthdata.labels import GROUP_CLASSES
from src.tnvpf.temporal import FrameSequence, TemporalModel, predict_videos

logger = logging.getLogger(__name__)

REPORT_HEADER = (
    "# mAC is overall accuracy; UAR averages recall over classes present in the truth;\n"
    "# macro-F1 averages per-class F1 over classes present in truth or predictions.\n"
)


@dataclass
class EvalReport:
    mAC: float
    UAR: float
    macro_F1: float
    per_class_accuracy: Dict[str, Optional[float]]
    confusion_matrix: List[List[int]]
    classes: List[str] = field(default_factory=lambda: list(GROUP_CLASSES))
    runtime: Dict[str, float] = field(default_factory=dict)

    @property
    def support(self) -> List[int]:
        return [int(sum(row)) for row in self.confusion_matrix]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mAC": self.mAC,
            "UAR": self.UAR,
            "macro-F1": self.macro_F1,
            "per_class_accuracy": dict(self.per_class_accuracy),
            "confusion_matrix": [list(row) for row in self.confusion_matrix],
            "support": self.support,
            "classes": list(self.classes),
        }


def confusion_matrix(truth: Sequence[str], pred: Sequence[str], classes: Sequence[str] = GROUP_CLASSES) -> np.ndarray:
    if len(truth) != len(pred):
        raise ShapeError(f"{len(truth)} labels but {len(pred)} predictions")
    index = {label: i for i, label in enumerate(classes)}
    matrix = np.zeros((len(classes), len(classes)), dtype=int)
    for t, p in zip(truth, pred):
        if t not in index or p not in index:
            raise UnknownClassError(f"label {t if t not in index else p!r} is outside the label space {tuple(classes)}")
        matrix[index[t], index[p]] += 1
    return matrix


def compute_report(truth: Sequence[str], pred: Sequence[str], classes: Sequence[str] = GROUP_CLASSES,
                   runtime: Optional[Dict[str, float]] = None) -> EvalReport:
    """
    Metrics for one set of predictions

    Args:
        truth: True labels
        pred: Predicted labels
        classes: Label space in report order
        runtime: Timing figures to carry into the report

    Returns:
        The report
    """
    if not truth:
        raise ShapeError("cannot evaluate an empty set of predictions")
    matrix = confusion_matrix(truth, pred, classes)
    support = matrix.sum(axis=1)
    predicted = matrix.sum(axis=0)
    diagonal = np.diag(matrix)

    recalls = {}
    f1_scores = []
    for i, label in enumerate(classes):
        recalls[label] = float(diagonal[i] / support[i]) if support[i] else None
        if support[i] or predicted[i]:
            f1_scores.append(2.0 * diagonal[i] / (support[i] + predicted[i]))
    present = [r for r in recalls.values() if r is not None]
    return EvalReport(
        mAC=float(diagonal.sum() / matrix.sum()),
        UAR=float(np.mean(present)),
        macro_F1=float(np.mean(f1_scores)),
        per_class_accuracy=recalls,
        confusion_matrix=matrix.tolist(),
        classes=list(classes),
        runtime=dict(runtime or {}),
    )


def evaluate(model: Any, dataset: Sequence[Any], batch_size: int = 256) -> EvalReport:
    """
    Evaluate a model on labelled data

    Args:
        model: FlowModel or baseline (on (group, label) pairs) or
               TemporalModel (on frame sequences, scored by video label)
        dataset: Samples matching the model
        batch_size: Evaluation batch size

    Returns:
        The report; timing is logged and kept out of to_dict
    """
    start = time.perf_counter()
    if isinstance(model, TemporalModel):
        truth, pred = [], []
        for batch in _length_batches(dataset, batch_size):
            truth.extend(seq.video_label for seq in batch)
            pred.extend(video for video, _ in predict_videos(batch, model))
    else:
        truth = [label for _, label in dataset]
        pred = []
        for start_index in range(0, len(dataset), batch_size):
            groups = [group for group, _ in dataset[start_index:start_index + batch_size]]
            if isinstance(model, FlowModel):
                pred.extend(predict_batch(groups, model)[0])
            else:
                pred.extend(model.predict(groups)[0])
    elapsed = time.perf_counter() - start
    runtime = {"seconds": elapsed, "samples": float(len(truth)),
               "samples_per_second": float(len(truth) / elapsed) if elapsed > 0 else 0.0}
    report = compute_report(truth, pred, runtime=runtime)
    logger.info("Evaluated %d samples: mAC %.4f, UAR %.4f, macro-F1 %.4f",
                len(truth), report.mAC, report.UAR, report.macro_F1)
    logger.info("Evaluation took %.3f s (%.1f samples/s)", elapsed, runtime["samples_per_second"])
    return report


def evaluate_frames(model: TemporalModel, sequences: Sequence[FrameSequence], batch_size: int = 256) -> EvalReport:
    """Frame-level report of the temporal model's per-step predictions"""
    truth, pred = [], []
    for batch in _length_batches(sequences, batch_size):
        truth.extend(label for seq in batch for label in seq.labels)
        pred.extend(label for _, frames in predict_videos(batch, model) for label in frames)
    return compute_report(truth, pred)


def _length_batches(sequences: Sequence[FrameSequence], batch_size: int) -> List[List[FrameSequence]]:
    by_length: Dict[int, List[FrameSequence]] = {}
    for seq in sequences:
        by_length.setdefault(seq.length, []).append(seq)
    batches = []
    for length in sorted(by_length):
        seqs = by_length[length]
        batches.extend(seqs[i:i + batch_size] for i in range(0, len(seqs), batch_size))
    return batches


def write_report(report: EvalReport, path: str, extra: Optional[Dict[str, Any]] = None) -> None:
    """
    Write a report as YAML, preceded by a comment header stating the metric
    definitions
    """
    data = report.to_dict()
    if extra:
        data.update(extra)
    with open(path, "w") as f:
        f.write(REPORT_HEADER)
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
    logger.info("Report written: %s", path)
