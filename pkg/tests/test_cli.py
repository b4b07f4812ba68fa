#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the CLI module
"""

import io
import os
import sys
import unittest
import tempfile
import yaml
from unittest.mock import patch, MagicMock

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import src.cli as cli
from src.synthdata.dataset_io import read_manifest

TOY_PRESET = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                          'config', 'presets', 'toy.yaml')


class TestCLI(unittest.TestCase):
    """
    Tests for the CLI module
    """

    def setUp(self):
        """
        Set up the test
        """
        # Create a temporary directory for test files
        self.temp_dir = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.temp_dir.name, 'run')

        # Create a test configuration file from the toy preset
        with open(TOY_PRESET) as f:
            self.test_config = yaml.safe_load(f)
        self.test_config['run']['output_dir'] = self.out
        self.test_config['data']['train_path'] = os.path.join(self.temp_dir.name, 'data', 'train.jsonl')
        self.test_config['data']['test_path'] = os.path.join(self.temp_dir.name, 'data', 'test.jsonl')

        self.test_config_path = os.path.join(self.temp_dir.name, 'test_config.yaml')
        with open(self.test_config_path, 'w') as f:
            yaml.dump(self.test_config, f)

    def tearDown(self):
        """
        Clean up after the test
        """
        # Remove the temporary directory
        self.temp_dir.cleanup()

    def run_cli(self, *args):
        return cli.main(['-c', self.test_config_path] + list(args))

    def test_setup_argparse(self):
        """
        Test setting up the argument parser
        """
        # Set up the argument parser
        parser = cli.setup_argparse()

        # Check that the parser has the expected commands
        choices = parser._subparsers._group_actions[0].choices
        for command in ('init', 'gen-data', 'train-nvpf', 'train-tnvpf', 'eval', 'grad-check', 'inspect'):
            self.assertIn(command, choices)

        args = parser.parse_args(['train-nvpf', '--seed', '3', '--out', 'x', '--baseline'])
        self.assertEqual((args.command, args.seed, args.out, args.baseline), ('train-nvpf', 3, 'x', True))

    def test_version(self):
        """
        Test the version output
        """
        with patch('sys.stdout', new_callable=io.StringIO) as stdout:
            self.assertEqual(cli.main(['--version']), cli.EXIT_OK)
        self.assertIn(cli.VERSION, stdout.getvalue())

    @patch('src.cli.ConfigManager')
    def test_init_config(self, mock_config_manager):
        """
        Test initializing a configuration
        """
        # Create a mock ConfigManager
        mock_config_manager_instance = MagicMock()
        mock_config_manager.return_value = mock_config_manager_instance

        output = os.path.join(self.temp_dir.name, 'init.yaml')
        self.assertEqual(cli.main(['init', '-o', output]), cli.EXIT_OK)

        # Check that the configuration was validated and saved
        mock_config_manager_instance.load_config.assert_called_once()
        mock_config_manager_instance.validate_config.assert_called_once()
        mock_config_manager_instance.save_config.assert_called_once_with(output)

    def test_init_writes_merged_config(self):
        """
        Test that init writes the defaults merged with the user file
        """
        output = os.path.join(self.temp_dir.name, 'merged.yaml')
        self.assertEqual(self.run_cli('init', '-o', output), cli.EXIT_OK)
        with open(output) as f:
            merged = yaml.safe_load(f)
        self.assertEqual(merged['nvpf']['units'], 2)
        self.assertEqual(merged['training']['beta2'], 0.999)

    def test_invalid_config_exit_code(self):
        """
        Test that an invalid configuration maps to exit code 2
        """
        self.test_config['nvpf']['classifier'] = 'svm'
        with open(self.test_config_path, 'w') as f:
            yaml.dump(self.test_config, f)
        self.assertEqual(self.run_cli('gen-data'), cli.EXIT_CONFIG)
        self.assertEqual(self.run_cli('init', '-o', os.path.join(self.temp_dir.name, 'x.yaml')), cli.EXIT_CONFIG)

    def test_missing_dataset_fails(self):
        """
        Test that a missing dataset maps to exit code 1
        """
        self.assertEqual(self.run_cli('train-nvpf'), cli.EXIT_FAILURE)

    def test_group_pipeline(self):
        """
        Test gen-data, train-nvpf, eval and inspect end to end
        """
        self.assertEqual(self.run_cli('gen-data'), cli.EXIT_OK)
        self.assertEqual(read_manifest(self.test_config['data']['train_path'])['seed'], 0)
        self.assertEqual(read_manifest(self.test_config['data']['test_path'])['seed'], 1)

        self.assertEqual(self.run_cli('train-nvpf'), cli.EXIT_OK)
        self.assertTrue(os.path.isdir(os.path.join(self.out, 'final')))

        with open(os.path.join(self.out, cli.RUN_MANIFEST)) as f:
            manifest = yaml.safe_load(f)
        self.assertEqual(manifest['mode'], 'train-nvpf')
        self.assertEqual(manifest['config']['nvpf']['units'], 2)

        self.assertEqual(self.run_cli('eval'), cli.EXIT_OK)
        with open(os.path.join(self.out, cli.REPORT)) as f:
            report = yaml.safe_load(f)
        for key in ('mAC', 'UAR', 'macro-F1', 'confusion_matrix'):
            self.assertIn(key, report)
        # 3 test videos of 3 frames with 2 groups each
        self.assertEqual(sum(report['support']), 18)

        self.assertEqual(self.run_cli('inspect', '--sample', '1'), cli.EXIT_OK)
        with open(os.path.join(self.out, cli.INSPECT_TRACE)) as f:
            self.assertTrue(f.read().startswith('flow 4x2'))
        self.assertEqual(self.run_cli('inspect', '--sample', '999'), cli.EXIT_CONFIG)

    def test_config_after_command(self):
        """
        Test the config option given after the subcommand and a repeatable eval report
        """
        spec_out = os.path.join(self.temp_dir.name, 'after')
        self.assertEqual(cli.main(['gen-data', '--config', self.test_config_path]), cli.EXIT_OK)
        self.assertEqual(cli.main(['train-nvpf', '--config', self.test_config_path, '--seed', '2',
                                   '--out', spec_out]), cli.EXIT_OK)
        with open(os.path.join(spec_out, cli.RUN_MANIFEST)) as f:
            self.assertEqual(yaml.safe_load(f)['seed'], 2)

        reports = []
        for _ in range(2):
            self.assertEqual(cli.main(['eval', '-c', self.test_config_path, '--out', spec_out]), cli.EXIT_OK)
            with open(os.path.join(spec_out, cli.REPORT), 'rb') as f:
                reports.append(f.read())
        self.assertEqual(reports[0], reports[1])

        # The subcommand's option wins over the global one
        args = cli.setup_argparse().parse_args(['-c', 'global.yaml', 'eval', '-c', 'local.yaml'])
        self.assertEqual((args.config, args.command_config), ('global.yaml', 'local.yaml'))

    def test_baseline_and_temporal(self):
        """
        Test the baseline and the temporal model through the same commands
        """
        self.assertEqual(self.run_cli('gen-data'), cli.EXIT_OK)

        baseline_out = os.path.join(self.temp_dir.name, 'baseline')
        self.assertEqual(self.run_cli('train-nvpf', '--baseline', '--out', baseline_out), cli.EXIT_OK)
        self.assertEqual(self.run_cli('eval', '--out', baseline_out), cli.EXIT_OK)
        self.assertEqual(self.run_cli('inspect', '--out', baseline_out), cli.EXIT_CONFIG)

        temporal_out = os.path.join(self.temp_dir.name, 'temporal')
        self.assertEqual(self.run_cli('train-tnvpf', '--out', temporal_out), cli.EXIT_OK)
        self.assertEqual(self.run_cli('eval', '--out', temporal_out), cli.EXIT_OK)
        with open(os.path.join(temporal_out, cli.REPORT)) as f:
            report = yaml.safe_load(f)
        self.assertEqual(sum(report['support']), 3)
        self.assertEqual(sum(report['frame_level']['support']), 9)

    def test_grad_check(self):
        """
        Test the gradient check command and its results file
        """
        self.assertEqual(self.run_cli('grad-check', '--suite', 'ops', '--seed', '3'), cli.EXIT_OK)
        with open(os.path.join(self.out, cli.GRAD_CHECK_REPORT)) as f:
            self.assertTrue(yaml.safe_load(f)['passed'])

        self.test_config['grad_check'] = {'epsilon': 1.0e-6, 'tolerance': 1.0e-30}
        with open(self.test_config_path, 'w') as f:
            yaml.dump(self.test_config, f)
        self.assertEqual(self.run_cli('grad-check', '--suite', 'emonet'), cli.EXIT_DIVERGENCE)

    def test_inspect_emonet(self):
        """
        Test the feature extractor description
        """
        with patch('sys.stdout', new_callable=io.StringIO):
            self.assertEqual(self.run_cli('inspect', '--emonet'), cli.EXIT_OK)
        with open(os.path.join(self.out, cli.INSPECT_TRACE)) as f:
            self.assertTrue(f.read().startswith('conv1 16x16x1'))


if __name__ == '__main__':
    unittest.main()
