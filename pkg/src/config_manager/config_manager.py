#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Configuration Manager for NVPF

This module handles loading, validating, and managing the run configuration.
"""

import os
import yaml
import logging
from typing import Dict, Any, List, Optional

from src.errors import ConfigError

logger = logging.getLogger(__name__)

CLASSIFIERS = ('likelihood', 'softmax')
BASELINES = ('concat', 'average')
CELLS = ('gru', 'rnn', 'lstm')
AGGREGATIONS = ('final', 'mean')


class ConfigManager:
    """
    Configuration Manager for NVPF

    This class is responsible for loading, validating, and managing the
    configuration. The packaged default configuration is always loaded first
    and an optional user file is merged over it.
    """

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the Configuration Manager

        Args:
            config_path: Path to the configuration file. If None, the default
                         configuration will be used.
        """
        self.config_path = config_path
        self.config = {}
        self.default_config_path = os.path.join(
            os.path.dirname(os.path.dirname(os.path.dirname(__file__))),
            'config',
            'default.yaml'
        )

    def load_config(self) -> Dict[str, Any]:
        """
        Load the configuration from the specified path or the default configuration

        Returns:
            The loaded configuration as a dictionary

        Raises:
            ConfigError: If a configuration file cannot be read or parsed
        """
        # Load default configuration
        try:
            with open(self.default_config_path, 'r') as f:
                self.config = yaml.safe_load(f) or {}
                logger.debug("Loaded default configuration from %s", self.default_config_path)
        except (OSError, yaml.YAMLError) as e:
            logger.error("Failed to load default configuration: %s", str(e))
            raise ConfigError(f"cannot load default configuration: {e}") from None

        # Load user configuration if specified
        if self.config_path:
            try:
                with open(self.config_path, 'r') as f:
                    user_config = yaml.safe_load(f) or {}
                    logger.debug("Loaded user configuration from %s", self.config_path)
            except (OSError, yaml.YAMLError) as e:
                logger.error("Failed to load user configuration: %s", str(e))
                raise ConfigError(f"cannot load configuration {self.config_path}: {e}") from None
            if not isinstance(user_config, dict):
                raise ConfigError(f"configuration {self.config_path} must be a mapping")

            # Merge user configuration with default configuration
            self._merge_configs(self.config, user_config)

        return self.config

    def _merge_configs(self, default_config: Dict[str, Any], user_config: Dict[str, Any]) -> None:
        """
        Merge user configuration with default configuration

        Args:
            default_config: Default configuration dictionary
            user_config: User configuration dictionary
        """
        for key, value in user_config.items():
            if (
                key in default_config and
                isinstance(default_config[key], dict) and
                isinstance(value, dict)
            ):
                self._merge_configs(default_config[key], value)
            else:
                default_config[key] = value

    def validate_config(self) -> bool:
        """
        Validate the configuration

        Returns:
            True if the configuration is valid

        Raises:
            ConfigError: Naming every offending key
        """
        errors: List[str] = []

        def check(key_path: str, condition, message: str) -> None:
            value = self.get_value(key_path)
            try:
                ok = value is not None and condition(value)
            except TypeError:
                ok = False
            if not ok:
                errors.append(f"{key_path}: {message} (got {value!r})")

        positive = lambda v: v > 0
        positive_int = lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1
        non_negative_int = lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0
        unit_interval = lambda v: 0 <= v < 1

        check('run.seed', non_negative_int, 'must be a non-negative integer')
        check('run.output_dir', lambda v: isinstance(v, str) and v != '', 'must be a non-empty path')

        check('training.learning_rate', positive, 'must be positive')
        check('training.beta1', unit_interval, 'must lie in [0, 1)')
        check('training.beta2', unit_interval, 'must lie in [0, 1)')
        check('training.epsilon', positive, 'must be positive')
        check('training.epochs', non_negative_int, 'must be a non-negative integer')
        for key in ('emonet', 'nvpf', 'tnvpf'):
            check(f'training.batch_sizes.{key}', positive_int, 'must be a positive integer')

        check('data.generator.feature_dim', lambda v: positive_int(v) and v >= 2, 'must be an integer of at least 2')
        check('data.generator.separation', lambda v: v >= 0, 'must be non-negative')
        check('data.generator.faces_per_group', positive_int, 'must be a positive integer')
        check('data.generator.groups_per_frame', positive_int, 'must be a positive integer')
        check('data.generator.frames', positive_int, 'must be a positive integer')
        check('data.generator.flip_probability', lambda v: 0 <= v <= 1, 'must lie in [0, 1]')
        for key in ('train_groups', 'test_groups', 'train_videos', 'test_videos'):
            check(f'data.generator.{key}', non_negative_int, 'must be a non-negative integer')

        check('grouping.clusters', positive_int, 'must be a positive integer')
        check('grouping.max_faces', positive_int, 'must be a positive integer')

        check('emonet.feature_dim', positive_int, 'must be a positive integer')
        check('emonet.preset', lambda v: v in ('full', 'toy'), "must be 'full' or 'toy'")

        check('nvpf.units', positive_int, 'must be a positive integer')
        check('nvpf.filters', positive_int, 'must be a positive integer')
        check('nvpf.residual_blocks', non_negative_int, 'must be a non-negative integer')
        check('nvpf.scale_bound', positive, 'must be positive')
        check('nvpf.classifier', lambda v: v in CLASSIFIERS, f'must be one of {CLASSIFIERS}')
        check('nvpf.prior_offset', lambda v: isinstance(v, (int, float)), 'must be a number')
        check('nvpf.prior_std', positive, 'must be positive')
        check('nvpf.baseline', lambda v: v in BASELINES, f'must be one of {BASELINES}')

        check('tnvpf.hidden', positive_int, 'must be a positive integer')
        check('tnvpf.max_groups', positive_int, 'must be a positive integer')
        check('tnvpf.cell', lambda v: v in CELLS, f'must be one of {CELLS}')
        check('tnvpf.aggregation', lambda v: v in AGGREGATIONS, f'must be one of {AGGREGATIONS}')
        check('tnvpf.curriculum', lambda v: isinstance(v, list) and len(v) > 0 and all(positive_int(t) for t in v),
              'must be a non-empty list of positive integers')

        check('grad_check.epsilon', lambda v: 1e-7 <= v <= 1e-3, 'must lie in [1e-7, 1e-3]')
        check('grad_check.tolerance', positive, 'must be positive')

        # Cross-field invariants
        faces = self.get_value('data.generator.faces_per_group')
        max_faces = self.get_value('grouping.max_faces')
        if isinstance(faces, int) and isinstance(max_faces, int) and faces > max_faces:
            errors.append(f"data.generator.faces_per_group: exceeds grouping.max_faces ({faces} > {max_faces})")
        groups = self.get_value('data.generator.groups_per_frame')
        max_groups = self.get_value('tnvpf.max_groups')
        if isinstance(groups, int) and isinstance(max_groups, int) and groups > max_groups:
            errors.append(f"data.generator.groups_per_frame: exceeds tnvpf.max_groups ({groups} > {max_groups})")
        dim = self.get_value('data.generator.feature_dim')
        if isinstance(dim, int) and isinstance(max_faces, int) and dim * max_faces < 2:
            errors.append("grouping.max_faces: the group grid needs at least two cells")

        if errors:
            for error in errors:
                logger.error("Invalid configuration: %s", error)
            raise ConfigError("invalid configuration: " + "; ".join(errors))
        return True

    def get_config(self) -> Dict[str, Any]:
        """
        Get the current configuration

        Returns:
            The current configuration as a dictionary
        """
        return self.config

    def get_value(self, key_path: str, default: Any = None) -> Any:
        """
        Get a value from the configuration using a dot-separated key path

        Args:
            key_path: Dot-separated key path (e.g., 'nvpf.units')
            default: Default value to return if the key is not found

        Returns:
            The value at the specified key path, or the default value if not found
        """
        keys = key_path.split('.')
        value = self.config

        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default

        return value

    def set_value(self, key_path: str, value: Any) -> None:
        """
        Set a value in the configuration using a dot-separated key path

        Args:
            key_path: Dot-separated key path (e.g., 'training.learning_rate')
            value: Value to set
        """
        keys = key_path.split('.')
        config = self.config

        for key in keys[:-1]:
            if key not in config or not isinstance(config[key], dict):
                config[key] = {}
            config = config[key]

        config[keys[-1]] = value

    def save_config(self, output_path: str) -> None:
        """
        Save the current configuration to a file

        Args:
            output_path: Path to save the configuration to
        """
        try:
            directory = os.path.dirname(os.path.abspath(output_path))
            os.makedirs(directory, exist_ok=True)
            with open(output_path, 'w') as f:
                yaml.safe_dump(self.config, f, default_flow_style=False, sort_keys=False)
                logger.debug("Saved configuration to %s", output_path)
        except OSError as e:
            logger.error("Failed to save configuration: %s", str(e))
            raise
