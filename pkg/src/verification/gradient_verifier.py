#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Gradient Verifier for NVPF

This module checks every analytic gradient the models rely on against
central finite differences: the differentiable operations, a toy EmoNet,
the likelihood loss of a 2×2 flow and the sequence loss of a two-frame
temporal model.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import yaml

from src.emonet.emonet import emonet_forward, init_emonet_params, toy_config
from src.numeric_core.conv import conv2d
from src.numeric_core.gradcheck import grad_check
from src.numeric_core import tensor as T
from src.numeric_core.tensor import Tensor
from src.nvpf.flow import FlowConfig, FlowModel, nvpf_loss
from src.grouping.grouping import GroupedFeature
from src.synthdata.generators import gen_group_sample
from src.synthdata.labels import GROUP_CLASSES
from src.tnvpf.temporal import FrameSequence, TemporalConfig, TemporalModel, sequence_loss

logger = logging.getLogger(__name__)

Check = Tuple[str, Callable[[Tensor], Tensor], Tensor]


@dataclass
class GradCheckResult:
    name: str
    coordinates: int
    error: float
    passed: bool


class GradientVerifier:
    """
    Gradient Verifier

    This class runs the finite-difference gradient suite.
    """

    def __init__(self, tolerance: float = 1e-4, epsilon: float = 1e-6, seed: int = 0):
        """
        Initialize the Gradient Verifier

        Args:
            tolerance: Largest accepted relative error
            epsilon: Finite-difference step
            seed: Seed for the random points and toy models
        """
        self.tolerance = tolerance
        self.epsilon = epsilon
        self.seed = seed
        self.results: List[GradCheckResult] = []

    def verify(self, suites: Optional[List[str]] = None) -> bool:
        """
        Run the gradient suite

        Args:
            suites: Subset of ``ops``, ``emonet``, ``nvpf``, ``tnvpf`` (all by default)

        Returns:
            True if every check is within tolerance, False otherwise
        """
        builders = {
            'ops': self._op_checks,
            'emonet': self._emonet_checks,
            'nvpf': self._nvpf_checks,
            'tnvpf': self._tnvpf_checks,
        }
        self.results = []
        for suite in suites or list(builders):
            logger.info("Checking gradients: %s", suite)
            for name, fn, x in builders[suite]():
                error = grad_check(fn, x, self.epsilon)
                passed = error <= self.tolerance
                self.results.append(GradCheckResult(f"{suite}.{name}", x.size, error, passed))
                if not passed:
                    logger.error("Gradient check failed for %s.%s: relative error %.3e", suite, name, error)

        worst = max((r.error for r in self.results), default=0.0)
        failed = sum(not r.passed for r in self.results)
        logger.info("Gradient checks: %d run, %d failed, worst relative error %.3e",
                    len(self.results), failed, worst)
        return failed == 0

    def write_results(self, path: str) -> None:
        data = {
            'tolerance': self.tolerance,
            'epsilon': self.epsilon,
            'seed': self.seed,
            'passed': all(r.passed for r in self.results),
            'checks': [
                {'name': r.name, 'coordinates': r.coordinates, 'error': r.error, 'passed': r.passed}
                for r in self.results
            ],
        }
        with open(path, 'w') as f:
            yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)

    def _op_checks(self) -> List[Check]:
        rng = np.random.default_rng(self.seed)

        def point(*shape: int) -> Tensor:
            return Tensor(rng.uniform(-2.0, 2.0, size=shape))

        def away_from_zero(*shape: int) -> Tensor:
            # relu has a kink at 0
            return Tensor(rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.1, 2.0, size=shape))

        weights = rng.uniform(-1.0, 1.0, size=(3, 4))
        other = Tensor(rng.uniform(-2.0, 2.0, size=(3, 4)))
        right = Tensor(rng.uniform(-2.0, 2.0, size=(4, 2)))
        kernel = Tensor(rng.uniform(-1.0, 1.0, size=(3, 3, 2, 3)))
        depthwise_kernel = Tensor(rng.uniform(-1.0, 1.0, size=(3, 3, 2, 1)))
        image = point(5, 4, 2)

        def weighted(t: Tensor) -> Tensor:
            # fixed random weights make every output coordinate matter
            w = np.random.default_rng(self.seed + 1).uniform(-1.0, 1.0, size=t.shape)
            return T.reduce_sum(T.mul(t, w))

        return [
            ('add', lambda x: weighted(T.add(x, other)), point(3, 4)),
            ('sub', lambda x: weighted(T.sub(other, x)), point(3, 4)),
            ('mul', lambda x: weighted(T.mul(x, other)), point(3, 4)),
            ('hadamard', lambda x: weighted(T.hadamard(x, x)), point(3, 4)),
            ('neg', lambda x: weighted(T.neg(x)), point(3, 4)),
            ('exp', lambda x: weighted(T.exp(x)), point(3, 4)),
            ('log', lambda x: weighted(T.log(x)), Tensor(rng.uniform(0.5, 2.0, size=(3, 4)))),
            ('tanh', lambda x: weighted(T.tanh(x)), point(3, 4)),
            ('sigmoid', lambda x: weighted(T.sigmoid(x)), point(3, 4)),
            ('relu', lambda x: weighted(T.relu(x)), away_from_zero(3, 4)),
            ('matmul.left', lambda x: weighted(T.matmul(x, right)), point(3, 4)),
            ('matmul.right', lambda x: weighted(T.matmul(Tensor(weights), x)), point(4, 2)),
            ('reduce_sum', lambda x: weighted(T.reduce_sum(x, axis=1)), point(3, 4)),
            ('reduce_mean', lambda x: weighted(T.reduce_mean(x, axis=0)), point(3, 4)),
            ('reshape', lambda x: weighted(T.reshape(x, (2, -1))), point(3, 4)),
            ('broadcast_to', lambda x: weighted(T.broadcast_to(x, (3, 4))), point(4)),
            ('concat', lambda x: weighted(T.concat([x, other], axis=1)), point(3, 4)),
            ('select', lambda x: weighted(T.select(x, 2, axis=1)), point(3, 4)),
            ('log_softmax', lambda x: weighted(T.log_softmax(x)), point(3, 4)),
            ('cross_entropy', lambda x: T.cross_entropy(x, [0, 2, 1]), point(3, 4)),
            ('conv2d', lambda x: weighted(conv2d(x, kernel)), point(5, 4, 2)),
            ('conv2d.kernel', lambda k: weighted(conv2d(image, k)), kernel),
            ('conv2d.stride2', lambda x: weighted(conv2d(x, kernel, stride=2)), point(5, 4, 2)),
            ('conv2d.depthwise', lambda x: weighted(conv2d(x, depthwise_kernel, depthwise=True)), point(2, 4, 4, 2)),
        ]

    def _emonet_checks(self) -> List[Check]:
        cfg = toy_config(feature_dim=4)
        params = init_emonet_params(cfg, seed=self.seed)
        face = Tensor(np.random.default_rng(self.seed).uniform(-1.0, 1.0, size=tuple(cfg.input_size)))
        target = np.random.default_rng(self.seed + 1).uniform(-1.0, 1.0, size=cfg.feature_dim)

        def loss(x: Tensor, p=params) -> Tensor:
            diff = T.sub(emonet_forward(x, cfg, p), target)
            return T.reduce_sum(T.mul(diff, diff))

        def with_param(name: str) -> Callable[[Tensor], Tensor]:
            return lambda value: loss(face, {**params, name: value})

        return [('input', loss, face)] + [
            (name, with_param(name), params[name]) for name in ('conv1.weight', 'feature.weight')
        ]

    def _toy_flow(self, rows: int, cols: int, seed: int) -> FlowModel:
        config = FlowConfig(rows=rows, cols=cols, units=2, filters=2, residual_blocks=1)
        model = FlowModel.create(config, seed=seed, identity=False)
        # shrink the weights so the bounded scales stay away from saturation
        for tensor in model.parameters().values():
            tensor.data = tensor.data * 0.5
        return model

    def _nvpf_checks(self) -> List[Check]:
        model = self._toy_flow(2, 2, self.seed)
        batch = [gen_group_sample(label, 2, 2, 3.0, self.seed + i)
                 for i, label in enumerate(GROUP_CLASSES)]
        group, label = batch[0]

        def input_loss(S: Tensor) -> Tensor:
            moved = GroupedFeature(S, group.mask, group.group_id, group.members)
            return nvpf_loss([(moved, label)] + batch[1:], model)

        checks: List[Check] = [('input', input_loss, group.S)]
        for name, value in model.parameters().items():
            if name.startswith('head.'):
                continue
            checks.append((name, lambda v, n=name: nvpf_loss(batch, model.with_parameter(n, v)), value))
        return checks

    def _tnvpf_checks(self) -> List[Check]:
        config = TemporalConfig(feature_dim=2, max_faces=2, max_groups=1, hidden=3,
                                units=2, filters=2, residual_blocks=1)
        model = TemporalModel.create(config, seed=self.seed, identity=False)
        for tensor in model.parameters().values():
            tensor.data = tensor.data * 0.5
        labels = ['positive', 'negative']
        frames = [[gen_group_sample(label, 2, 2, 3.0, self.seed + t)[0]] for t, label in enumerate(labels)]
        seq = FrameSequence(frames, labels, video_label='negative')

        def loss_of(m: TemporalModel) -> Tensor:
            return sequence_loss(seq, m.cell_params, (m.group_flow, m.frame_flow), m.config)

        checks: List[Check] = []
        for name, value in model.parameters().items():
            if name.startswith('cell.') or name.endswith('conv_out.weight'):
                checks.append((name, lambda v, n=name: loss_of(model.with_parameter(n, v)), value))
        return checks
