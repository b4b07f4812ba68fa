#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Typed view of a merged configuration for one command line run
"""

import copy
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from src.config_manager.config_manager import ConfigManager
from src.errors import ConfigError
from src.nvpf.flow import FlowConfig
from src.tnvpf.temporal import TemporalConfig

MODES = ("train-nvpf", "train-tnvpf", "eval", "gen-data", "grad-check", "inspect")


@dataclass
class RunConfig:
    """
    Mode, paths and hyperparameters of a run

    ``raw`` keeps the full merged dictionary, written to the run manifest.
    """

    mode: str
    seed: int
    output_dir: str
    train_path: str
    test_path: str
    model_path: Optional[str]
    learning_rate: float
    beta1: float
    beta2: float
    epsilon: float
    epochs: int
    batch_size: int
    feature_dim: int
    max_faces: int
    clusters: int
    cluster_faces: bool
    hidden: int
    units: int
    curriculum: List[int]
    raw: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_manager(cls, manager: ConfigManager, mode: str, seed: Optional[int] = None,
                     output_dir: Optional[str] = None) -> "RunConfig":
        """
        Build the run view from a loaded configuration

        Command line overrides are written back into the configuration before
        validation so that the run manifest reflects them.

        Args:
            manager: Manager holding the merged configuration
            mode: One of MODES
            seed: Overrides run.seed
            output_dir: Overrides run.output_dir

        Returns:
            The run configuration

        Raises:
            ConfigError: If the mode is unknown or the configuration is invalid
        """
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
        if seed is not None:
            manager.set_value('run.seed', seed)
        if output_dir is not None:
            manager.set_value('run.output_dir', output_dir)
        manager.validate_config()

        get = manager.get_value
        out = get('run.output_dir')
        model_path = get('inspect.model_path') if mode == 'inspect' else get('eval.model_path')
        batch_key = 'tnvpf' if mode == 'train-tnvpf' else 'nvpf'
        return cls(
            mode=mode,
            seed=get('run.seed'),
            output_dir=out,
            train_path=get('data.train_path'),
            test_path=get('data.test_path'),
            model_path=model_path or os.path.join(out, 'final'),
            learning_rate=float(get('training.learning_rate')),
            beta1=float(get('training.beta1')),
            beta2=float(get('training.beta2')),
            epsilon=float(get('training.epsilon')),
            epochs=get('training.epochs'),
            batch_size=get(f'training.batch_sizes.{batch_key}'),
            feature_dim=get('data.generator.feature_dim'),
            max_faces=get('grouping.max_faces'),
            clusters=get('grouping.clusters'),
            cluster_faces=bool(get('grouping.cluster_faces', False)),
            hidden=get('tnvpf.hidden'),
            units=get('nvpf.units'),
            curriculum=list(get('tnvpf.curriculum')),
            raw=copy.deepcopy(manager.get_config()),
        )

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.raw.get(name) or {})

    def flow_config(self) -> FlowConfig:
        nvpf = self.section('nvpf')
        return FlowConfig(
            rows=self.feature_dim,
            cols=self.max_faces,
            units=nvpf['units'],
            filters=nvpf['filters'],
            residual_blocks=nvpf['residual_blocks'],
            scale_bound=float(nvpf['scale_bound']),
            classifier=nvpf['classifier'],
            prior_offset=float(nvpf['prior_offset']),
            prior_std=float(nvpf['prior_std']),
        )

    def temporal_config(self) -> TemporalConfig:
        nvpf, tnvpf = self.section('nvpf'), self.section('tnvpf')
        return TemporalConfig(
            feature_dim=self.feature_dim,
            max_faces=self.max_faces,
            max_groups=tnvpf['max_groups'],
            hidden=self.hidden,
            units=nvpf['units'],
            filters=nvpf['filters'],
            residual_blocks=nvpf['residual_blocks'],
            scale_bound=float(nvpf['scale_bound']),
            cell=tnvpf['cell'],
            aggregation=tnvpf['aggregation'],
        )

    def generator(self) -> Dict[str, Any]:
        return self.section('data').get('generator', {})
