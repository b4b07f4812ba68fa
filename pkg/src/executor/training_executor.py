#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Training Executor for NVPF

This module runs Adam optimization of a model's loss over shuffled
mini-batches, writes the loss curve and the best and final checkpoints.
"""

import logging
import math
import os
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.checkpoint.checkpoint_manager import CheckpointManager, deserialize
from src.config_manager.run_config import RunConfig
from src.errors import ConfigError, DivergenceError
from src.numeric_core.optim import Adam
from src.numeric_core.tensor import Tensor, backward
from src.nvpf.flow import FlowModel, nvpf_loss
from src.tnvpf.temporal import FrameSequence, TemporalModel, batch_sequence_loss

logger = logging.getLogger(__name__)

LOSS_CURVE = 'loss_curve.txt'


@dataclass
class TrainingResult:
    """
    Outcome of a training run
    """

    steps: int
    losses: List[float] = field(default_factory=list)
    initial_loss: Optional[float] = None
    best_loss: Optional[float] = None
    final_path: Optional[str] = None
    best_path: Optional[str] = None

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else self.initial_loss


class TrainingExecutor:
    """
    Training Executor

    This class coordinates training of the flow, the temporal model and the
    baselines with a shared optimizer setup and checkpoint layout.
    """

    def __init__(self, run: RunConfig, output_dir: Optional[str] = None):
        """
        Initialize the Training Executor

        Args:
            run: Run configuration supplying optimizer settings and seed
            output_dir: Directory for the loss curve and checkpoints
                        (defaults to the run's output directory)
        """
        self.run = run
        self.output_dir = output_dir or run.output_dir
        os.makedirs(self.output_dir, exist_ok=True)
        self.checkpoints = CheckpointManager(self.output_dir)

    def _batches(self, samples: Sequence[Any], batch_size: int, rng: np.random.Generator) -> List[List[Any]]:
        order = rng.permutation(len(samples))
        return [[samples[i] for i in order[start:start + batch_size]] for start in range(0, len(samples), batch_size)]

    def train(
        self,
        model: Any,
        loss_fn: Callable[[Any, Sequence[Any]], Tensor],
        phases: Sequence[Tuple[Sequence[Any], int]],
        batch_size: int,
        extra: Optional[Dict[str, Any]] = None,
    ) -> TrainingResult:
        """
        Optimize ``loss_fn`` over one or more training phases

        Args:
            model: Object exposing ``parameters()``; updated in place
            loss_fn: Maps (model, batch) to a scalar loss
            phases: (samples, epochs) pairs trained in order
            batch_size: Mini-batch size
            extra: Extra manifest fields for the checkpoints

        Returns:
            The training result

        Raises:
            DivergenceError: With the offending step when the loss or a scale
                             network output is not finite
        """
        if batch_size < 1:
            raise ConfigError(f"batch size must be positive, got {batch_size}")
        params = model.parameters()
        optimizer = Adam(params, lr=self.run.learning_rate, beta1=self.run.beta1,
                         beta2=self.run.beta2, eps=self.run.epsilon)
        rng = np.random.default_rng(self.run.seed)
        result = TrainingResult(steps=0)
        curve_path = os.path.join(self.output_dir, LOSS_CURVE)

        logger.info("Starting training: %d parameter tensors, %d phase(s), lr %s",
                    len(params), len(phases), self.run.learning_rate)
        with open(curve_path, 'w') as curve:
            for phase, (samples, epochs) in enumerate(phases):
                if not samples:
                    raise ConfigError(f"training phase {phase} has no samples")
                # lengths differ between curriculum phases, so losses are only comparable within one
                self.checkpoints.best_loss = float("inf")
                if result.initial_loss is None:
                    first = self._batches(samples, batch_size, np.random.default_rng(self.run.seed))[0]
                    result.initial_loss = float(loss_fn(model, first).item())
                for epoch in range(epochs):
                    epoch_losses = []
                    for batch in self._batches(samples, batch_size, rng):
                        step = result.steps
                        try:
                            loss = loss_fn(model, batch)
                        except DivergenceError as e:
                            raise DivergenceError(str(e), step) from None
                        value = float(loss.item())
                        if not math.isfinite(value):
                            raise DivergenceError("non-finite training loss", step)
                        optimizer.zero_grad()
                        backward(loss)
                        optimizer.step()
                        curve.write(f"{step} {value!r}\n")
                        logger.debug("step %d loss %.6f", step, value)
                        result.losses.append(value)
                        epoch_losses.append(value)
                        result.steps += 1
                    mean_loss = float(np.mean(epoch_losses))
                    logger.info("Phase %d epoch %d: mean loss %.6f", phase, epoch, mean_loss)
                    if self.checkpoints.save_if_best(model, mean_loss, extra):
                        result.best_path = self.checkpoints.path('best')
                        result.best_loss = mean_loss

        result.final_path = self.checkpoints.save_final(model, extra)
        logger.info("Training finished after %d steps", result.steps)
        return result

    def train_nvpf(self, model: FlowModel, groups: Sequence[Tuple[Any, str]]) -> TrainingResult:
        """
        Train a flow on labelled groups with the likelihood loss
        """
        return self.train(model, lambda m, batch: nvpf_loss(batch, m), [(groups, self.run.epochs)],
                          self.run.batch_size, extra={'mode': 'train-nvpf', 'seed': self.run.seed})

    def train_baseline(self, baseline: Any, groups: Sequence[Tuple[Any, str]]) -> TrainingResult:
        """
        Train a fusion baseline with the same optimizer and batches as the flow
        """
        return self.train(baseline, lambda m, batch: m.loss(batch), [(groups, self.run.epochs)],
                          self.run.batch_size, extra={'mode': 'baseline', 'seed': self.run.seed})

    def train_tnvpf(self, model: TemporalModel, sequences: Sequence[FrameSequence]) -> TrainingResult:
        """
        Train the temporal model through the curriculum of sequence lengths

        Every phase crops the sequences to its length and runs the configured
        number of epochs; batches hold sequences of equal length.
        """
        init_from = self.run.section('tnvpf').get('init_from')
        if init_from:
            self.load_group_flow(model, init_from)
        phases = []
        for length in self.run.curriculum:
            cropped = [seq.crop(length) for seq in sequences]
            phases.append((cropped, self.run.epochs))
        return self.train(model, _bucketed_sequence_loss, phases, self.run.batch_size,
                          extra={'mode': 'train-tnvpf', 'seed': self.run.seed, 'curriculum': list(self.run.curriculum)})

    @staticmethod
    def load_group_flow(model: TemporalModel, path: str) -> None:
        """
        Initialize the group-level flow from a trained flow checkpoint
        """
        flow = deserialize(path)
        if not isinstance(flow, FlowModel) or flow.shape != model.group_flow.shape:
            raise ConfigError(f"{path} is not a flow checkpoint matching the group grid {model.group_flow.shape}")
        arrays = OrderedDict((name, tensor.data) for name, tensor in flow.parameters().items())
        units = model.group_flow.config.units
        if len(flow.units) != units:
            raise ConfigError(f"{path} has {len(flow.units)} units, the temporal model expects {units}")
        model.group_flow.load_parameters(arrays)
        model.group_flow.set_priors(flow.prior_means, flow.prior_stds)
        logger.info("Initialized group-level flow from %s", path)


def _bucketed_sequence_loss(model: TemporalModel, batch: Sequence[FrameSequence]) -> Tensor:
    # Sequences of different lengths cannot share a step; average over length buckets
    buckets: Dict[int, List[FrameSequence]] = OrderedDict()
    for seq in batch:
        buckets.setdefault(seq.length, []).append(seq)
    total = None
    for seqs in buckets.values():
        loss = batch_sequence_loss(seqs, model) * (len(seqs) / len(batch))
        total = loss if total is None else total + loss
    return total
