#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Synthetic comparisons of the fusion models against their baselines

Both runners train the model and its baseline with identical optimizer
settings and data, then score them on the same test set.
"""

import dataclasses
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

from src.config_manager.run_config import RunConfig
from src.executor.training_executor import TrainingExecutor, TrainingResult
from src.grouping.grouping import GroupedFeature
from src.nvpf.baselines import create_baseline
from src.nvpf.flow import FlowModel
from src.tnvpf.temporal import FrameSequence, TemporalModel, per_frame_majority
from src.verification.model_evaluator import EvalReport, compute_report, evaluate

logger = logging.getLogger(__name__)

Labelled = Sequence[Tuple[GroupedFeature, str]]


@dataclass
class ComparisonResult:
    model_report: EvalReport
    baseline_report: EvalReport
    model_training: TrainingResult
    baseline_training: Optional[TrainingResult] = None

    @property
    def margin(self) -> float:
        """mAC gain of the model over the baseline"""
        return self.model_report.mAC - self.baseline_report.mAC

    def to_dict(self) -> Dict[str, Any]:
        return {
            'model': self.model_report.to_dict(),
            'baseline': self.baseline_report.to_dict(),
            'margin': self.margin,
        }


def _with_batch_size(run: RunConfig, key: str) -> RunConfig:
    sizes = run.section('training').get('batch_sizes', {})
    return dataclasses.replace(run, batch_size=sizes.get(key, run.batch_size))


def fusion_benefit(run: RunConfig, train: Labelled, test: Labelled,
                   baseline_kind: Optional[str] = None) -> ComparisonResult:
    """
    Train a flow and a fusion baseline on labelled groups and score both

    Args:
        run: Run configuration (optimizer, seed, grid, output directory)
        train: Training groups
        test: Test groups
        baseline_kind: ``concat`` or ``average`` (defaults to nvpf.baseline)

    Returns:
        Reports of the flow and of the baseline
    """
    run = _with_batch_size(run, 'nvpf')
    kind = baseline_kind or run.section('nvpf').get('baseline', 'concat')

    model = FlowModel.create(run.flow_config(), seed=run.seed)
    model_training = TrainingExecutor(run, os.path.join(run.output_dir, 'nvpf')).train_nvpf(model, train)
    baseline = create_baseline(kind, run.feature_dim, run.max_faces, seed=run.seed)
    baseline_training = TrainingExecutor(run, os.path.join(run.output_dir, kind)).train_baseline(baseline, train)

    result = ComparisonResult(evaluate(model, test), evaluate(baseline, test), model_training, baseline_training)
    logger.info("Fusion comparison: flow mAC %.4f, %s baseline mAC %.4f",
                result.model_report.mAC, kind, result.baseline_report.mAC)
    return result


def temporal_benefit(run: RunConfig, train: Sequence[FrameSequence], test: Sequence[FrameSequence],
                     train_groups: Labelled) -> ComparisonResult:
    """
    Train the temporal model and compare it with per-frame majority voting

    The baseline classifies each group with a flow trained on ``train_groups``,
    takes the majority per frame and then the majority over frames.

    Args:
        run: Run configuration
        train: Training videos
        test: Test videos
        train_groups: Labelled groups of the training frames

    Returns:
        Video-level reports of the temporal model and of the baseline
    """
    model = TemporalModel.create(run.temporal_config(), seed=run.seed)
    temporal_run = _with_batch_size(run, 'tnvpf')
    model_training = TrainingExecutor(temporal_run, os.path.join(run.output_dir, 'tnvpf')).train_tnvpf(model, train)

    flow_run = _with_batch_size(run, 'nvpf')
    flow = FlowModel.create(run.flow_config(), seed=run.seed)
    baseline_training = TrainingExecutor(flow_run, os.path.join(run.output_dir, 'nvpf')).train_nvpf(flow, train_groups)

    truth = [seq.video_label for seq in test]
    majority = compute_report(truth, [per_frame_majority(seq, flow)[0] for seq in test])
    result = ComparisonResult(evaluate(model, test), majority, model_training, baseline_training)
    logger.info("Temporal comparison: temporal mAC %.4f, per-frame majority mAC %.4f",
                result.model_report.mAC, result.baseline_report.mAC)
    return result
