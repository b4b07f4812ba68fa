#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Command Line Interface for NVPF

This module provides the command line interface for training, evaluating
and inspecting the group emotion fusion models.
"""

import os
import sys
import argparse
import logging
import yaml
from typing import Any, Callable, Dict, List

from src.checkpoint.checkpoint_manager import deserialize
from src.config_manager.config_manager import ConfigManager
from src.config_manager.run_config import RunConfig
from src.emonet.emonet import full_config, toy_config
from src.errors import ConfigError, DivergenceError, NvpfError
from src.executor.training_executor import TrainingExecutor
from src.nvpf.baselines import create_baseline
from src.nvpf.flow import FlowModel
from src.synthdata.dataset_io import SceneRecord, read_dataset, write_dataset, write_manifest
from src.synthdata.generators import (
    gen_group_scene_dataset,
    gen_video_dataset,
    records_to_groups,
    records_to_sequences,
)
from src.tnvpf.temporal import TemporalModel
from src.verification.gradient_verifier import GradientVerifier
from src.verification.inspector import inspect_emonet, inspect_flow, inspect_sequence
from src.verification.model_evaluator import evaluate, evaluate_frames, write_report

VERSION = '0.1.0'
RUN_MANIFEST = 'run_manifest.yaml'
REPORT = 'report.yaml'
GRAD_CHECK_REPORT = 'grad_check.yaml'
INSPECT_TRACE = 'inspect.txt'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3

logger = logging.getLogger(__name__)


def _add_config_option(parser: argparse.ArgumentParser) -> None:
    # Same option after the subcommand; wins over the global one
    parser.add_argument(
        '-c', '--config',
        help='Path to the configuration file',
        dest='command_config',
        default=None
    )


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    _add_config_option(parser)
    parser.add_argument(
        '--seed',
        help='Override run.seed',
        type=int,
        default=None
    )
    parser.add_argument(
        '--out',
        help='Override run.output_dir',
        default=None
    )


def setup_argparse() -> argparse.ArgumentParser:
    """
    Set up the argument parser

    Returns:
        Configured argument parser
    """
    parser = argparse.ArgumentParser(
        prog='nvpf',
        description='NVPF - Group emotion recognition by non-volume preserving fusion'
    )

    # Global options
    parser.add_argument(
        '-c', '--config',
        help='Path to the configuration file',
        default=None
    )
    parser.add_argument(
        '-v', '--verbose',
        help='Enable verbose output',
        action='store_true'
    )
    parser.add_argument(
        '--version',
        help='Show version information',
        action='store_true'
    )

    # Subcommands
    subparsers = parser.add_subparsers(
        dest='command',
        help='Command to execute'
    )

    # Init command
    init_parser = subparsers.add_parser(
        'init',
        help='Write the merged configuration to a file'
    )
    init_parser.add_argument(
        '-o', '--output',
        help='Path to save the configuration',
        default='nvpf-config.yaml'
    )
    _add_config_option(init_parser)

    # Data generation
    gen_parser = subparsers.add_parser(
        'gen-data',
        help='Generate synthetic train and test datasets'
    )
    gen_parser.add_argument(
        '--kind',
        help='Videos of multi-group frames, or single-group scenes',
        choices=['videos', 'groups'],
        default='videos'
    )
    _add_run_options(gen_parser)

    # Training
    nvpf_parser = subparsers.add_parser(
        'train-nvpf',
        help='Train the group-level fusion flow'
    )
    nvpf_parser.add_argument(
        '--baseline',
        help='Train the configured fusion baseline instead of the flow',
        action='store_true'
    )
    _add_run_options(nvpf_parser)

    tnvpf_parser = subparsers.add_parser(
        'train-tnvpf',
        help='Train the temporal fusion model'
    )
    _add_run_options(tnvpf_parser)

    # Evaluation
    eval_parser = subparsers.add_parser(
        'eval',
        help='Evaluate a checkpoint on the test dataset'
    )
    eval_parser.add_argument(
        '--model',
        help='Checkpoint directory (overrides eval.model_path)',
        default=None
    )
    _add_run_options(eval_parser)

    # Gradient check
    grad_parser = subparsers.add_parser(
        'grad-check',
        help='Check analytic gradients against finite differences'
    )
    grad_parser.add_argument(
        '--suite',
        help='Restrict to one suite (repeatable)',
        choices=['ops', 'emonet', 'nvpf', 'tnvpf'],
        action='append',
        default=None
    )
    _add_run_options(grad_parser)

    # Inspection
    inspect_parser = subparsers.add_parser(
        'inspect',
        help='Print a trace of a model on one test sample'
    )
    inspect_parser.add_argument(
        '--model',
        help='Checkpoint directory (overrides inspect.model_path)',
        default=None
    )
    inspect_parser.add_argument(
        '--sample',
        help='Index of the test sample (overrides inspect.sample_index)',
        type=int,
        default=None
    )
    inspect_parser.add_argument(
        '--emonet',
        help='Print the configured feature extractor instead of a model trace',
        action='store_true'
    )
    _add_run_options(inspect_parser)

    return parser


def show_version() -> None:
    """
    Show version information
    """
    print(f"NVPF v{VERSION}")
    print("Group emotion recognition by non-volume preserving fusion")


def write_run_manifest(run: RunConfig, argv: List[str]) -> str:
    """
    Record mode, seed and the full merged configuration of a run

    Args:
        run: Run configuration
        argv: Command line arguments

    Returns:
        Path of the manifest
    """
    os.makedirs(run.output_dir, exist_ok=True)
    path = os.path.join(run.output_dir, RUN_MANIFEST)
    manifest = {
        'version': VERSION,
        'mode': run.mode,
        'seed': run.seed,
        'argv': list(argv),
        'config': run.raw,
    }
    with open(path, 'w') as f:
        yaml.safe_dump(manifest, f, default_flow_style=False, sort_keys=False)
    logger.debug("Run manifest written: %s", path)
    return path


def init_config(args: argparse.Namespace, config_manager: ConfigManager) -> int:
    """
    Initialize a new configuration

    Args:
        args: Command line arguments
        config_manager: Configuration manager

    Returns:
        Exit code
    """
    config_manager.save_config(args.output)
    logger.info("Configuration initialized and saved to %s", args.output)
    return EXIT_OK


def generate_data(args: argparse.Namespace, run: RunConfig) -> int:
    """
    Generate train and test datasets with their manifests

    The test split uses the next seed so the two never share a draw.
    """
    gen = run.generator()
    common = dict(faces_per_group=gen['faces_per_group'], M=gen['feature_dim'], separation=float(gen['separation']))
    splits = {}
    if args.kind == 'videos':
        for name, count, seed in (('train', gen['train_videos'], run.seed), ('test', gen['test_videos'], run.seed + 1)):
            splits[name] = gen_video_dataset(count, gen['frames'], gen['groups_per_frame'], seed,
                                             flip_probability=float(gen['flip_probability']), **common)
    else:
        for name, count, seed in (('train', gen['train_groups'], run.seed), ('test', gen['test_groups'], run.seed + 1)):
            splits[name] = gen_group_scene_dataset(count, seed=seed, **common)

    for name, path in (('train', run.train_path), ('test', run.test_path)):
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        write_dataset(path, splits[name])
        write_manifest(path, dict(gen, kind=args.kind), run.seed if name == 'train' else run.seed + 1,
                       {'records': len(splits[name])})
        logger.info("Wrote %d %s records to %s", len(splits[name]), name, path)
    return EXIT_OK


def _groups(run: RunConfig, records: List[SceneRecord]):
    cluster_k = run.clusters if run.cluster_faces else None
    return records_to_groups(records, run.max_faces, cluster_k, run.seed)


def train_nvpf(args: argparse.Namespace, run: RunConfig) -> int:
    """
    Train the group-level flow (or the configured baseline)
    """
    groups = _groups(run, read_dataset(run.train_path))
    executor = TrainingExecutor(run)
    if args.baseline:
        kind = run.section('nvpf')['baseline']
        baseline = create_baseline(kind, run.feature_dim, run.max_faces, seed=run.seed)
        result = executor.train_baseline(baseline, groups)
    else:
        model = FlowModel.create(run.flow_config(), seed=run.seed)
        result = executor.train_nvpf(model, groups)
    logger.info("Final loss %s, checkpoint %s", result.final_loss, result.final_path)
    return EXIT_OK


def train_tnvpf(args: argparse.Namespace, run: RunConfig) -> int:
    """
    Train the temporal fusion model through the curriculum
    """
    sequences = records_to_sequences(read_dataset(run.train_path), run.max_faces)
    model = TemporalModel.create(run.temporal_config(), seed=run.seed)
    result = TrainingExecutor(run).train_tnvpf(model, sequences)
    logger.info("Final loss %s, checkpoint %s", result.final_loss, result.final_path)
    return EXIT_OK


def evaluate_model(args: argparse.Namespace, run: RunConfig) -> int:
    """
    Evaluate a checkpoint on the test dataset and write the report
    """
    model_path = args.model or run.model_path
    model = deserialize(model_path)
    records = read_dataset(run.test_path)
    extra: Dict[str, Any] = {'model_path': model_path, 'test_path': run.test_path}
    if isinstance(model, TemporalModel):
        sequences = records_to_sequences(records, run.max_faces)
        report = evaluate(model, sequences)
        extra['frame_level'] = evaluate_frames(model, sequences).to_dict()
    elif isinstance(model, tuple):
        raise ConfigError(f"{model_path} holds a feature extractor, which has no group-level evaluation")
    else:
        report = evaluate(model, _groups(run, records))
    write_report(report, os.path.join(run.output_dir, REPORT), extra)
    print(f"mAC {report.mAC:.4f} UAR {report.UAR:.4f} macro-F1 {report.macro_F1:.4f}")
    return EXIT_OK


def check_gradients(args: argparse.Namespace, run: RunConfig) -> int:
    """
    Run the finite-difference gradient suite
    """
    settings = run.section('grad_check')
    verifier = GradientVerifier(tolerance=float(settings['tolerance']), epsilon=float(settings['epsilon']),
                                seed=run.seed)
    passed = verifier.verify(args.suite)
    verifier.write_results(os.path.join(run.output_dir, GRAD_CHECK_REPORT))
    if not passed:
        logger.error("Gradient check failed")
        return EXIT_DIVERGENCE
    return EXIT_OK


def inspect_model(args: argparse.Namespace, run: RunConfig) -> int:
    """
    Print and save a trace of a model on one test sample
    """
    if args.emonet:
        emonet = run.section('emonet')
        preset = full_config if emonet.get('preset', 'full') == 'full' else toy_config
        trace = inspect_emonet(preset(emonet.get('feature_dim', 64)))
    else:
        model_path = args.model or run.model_path
        model = deserialize(model_path)
        index = args.sample if args.sample is not None else run.section('inspect').get('sample_index', 0)
        records = read_dataset(run.test_path)
        if isinstance(model, TemporalModel):
            samples = records_to_sequences(records, run.max_faces)
            trace = inspect_sequence(model, _pick(samples, index))
        elif isinstance(model, FlowModel):
            group, _ = _pick(_groups(run, records), index)
            trace = inspect_flow(model, group)
        elif isinstance(model, tuple):
            trace = inspect_emonet(model[0])
        else:
            raise ConfigError(f"{model_path} holds a baseline, which has no trace")
    with open(os.path.join(run.output_dir, INSPECT_TRACE), 'w') as f:
        f.write(trace)
    sys.stdout.write(trace)
    return EXIT_OK


def _pick(samples: List[Any], index: int) -> Any:
    if not 0 <= index < len(samples):
        raise ConfigError(f"sample index {index} out of range for {len(samples)} test samples")
    return samples[index]


HANDLERS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    'gen-data': generate_data,
    'train-nvpf': train_nvpf,
    'train-tnvpf': train_tnvpf,
    'eval': evaluate_model,
    'grad-check': check_gradients,
    'inspect': inspect_model,
}


def run_command(args: argparse.Namespace, config_manager: ConfigManager, argv: List[str]) -> int:
    """
    Load the configuration, run one command and map failures to exit codes

    Args:
        args: Command line arguments
        config_manager: Configuration manager
        argv: Raw command line, recorded in the run manifest

    Returns:
        0 on success, 1 on a generic failure, 2 on a configuration error,
        3 on numeric divergence or a failed gradient check
    """
    try:
        config_manager.load_config()
        if args.command == 'init':
            config_manager.validate_config()
            return init_config(args, config_manager)
        run = RunConfig.from_manager(config_manager, args.command, seed=args.seed, output_dir=args.out)
        write_run_manifest(run, argv)
        return HANDLERS[args.command](args, run)
    except ConfigError as e:
        logger.error("Configuration error: %s", str(e))
        return EXIT_CONFIG
    except DivergenceError as e:
        logger.error("Numeric divergence: %s", str(e))
        return EXIT_DIVERGENCE
    except (NvpfError, OSError, KeyError, ValueError) as e:
        logger.error("Command %s failed: %s", args.command, str(e))
        return EXIT_FAILURE


def main(argv: List[str] = None) -> int:
    """
    Main entry point

    Args:
        argv: Command line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = setup_argparse()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    # Show version information
    if args.version:
        show_version()
        return EXIT_OK

    if args.command is None:
        parser.print_help()
        return EXIT_OK

    config_path = getattr(args, 'command_config', None) or args.config
    return run_command(args, ConfigManager(config_path), argv)


if __name__ == '__main__':
    sys.exit(main())
