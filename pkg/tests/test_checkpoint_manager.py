#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the Checkpoint Manager
"""

import os
import shutil
import sys
import tempfile
import unittest

import numpy as np
import yaml

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.checkpoint.checkpoint_manager import (
    CheckpointManager,
    deserialize,
    load_checkpoint,
    save_checkpoint,
    serialize,
)
from src.emonet.emonet import emonet_forward, init_emonet_params, toy_config
from src.errors import CheckpointError, ChecksumError, VersionError
from src.grouping.grouping import GroupedFeature
from src.numeric_core.tensor import Tensor
from src.nvpf.baselines import create_baseline
from src.nvpf.flow import FlowConfig, FlowModel, predict_batch
from src.tnvpf.temporal import FrameSequence, TemporalConfig, TemporalModel, sequence_logits


def small_flow(seed=0):
    model = FlowModel.create(FlowConfig(rows=2, cols=2, units=2, filters=2, residual_blocks=1), seed=seed,
                             identity=False)
    model.set_priors(model.prior_means * 0.5, model.prior_stds * 2.0)
    return model


class TestCheckpointFiles(unittest.TestCase):
    """
    Tests for save_checkpoint and load_checkpoint
    """

    def setUp(self):
        """
        Set up the test
        """
        self.temp_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.temp_dir, 'ckpt')
        self.tensors = {'a': Tensor(np.arange(6.0).reshape(2, 3)), 'b': Tensor(np.array([0.1, -2.5]))}

    def tearDown(self):
        """
        Clean up after the test
        """
        shutil.rmtree(self.temp_dir)

    def test_manifest_layout(self):
        """
        Test the manifest fields and the stored tensors
        """
        save_checkpoint(self.path, 'flow', {'rows': 2}, self.tensors, extra={'note': 'x'})
        with open(os.path.join(self.path, 'manifest.yaml')) as f:
            manifest = yaml.safe_load(f)
        self.assertEqual(manifest['version'], 1)
        self.assertEqual(manifest['kind'], 'flow')
        self.assertEqual(manifest['extra'], {'note': 'x'})
        self.assertEqual([entry['name'] for entry in manifest['tensors']], ['a', 'b'])
        self.assertEqual(manifest['tensors'][0]['shape'], [2, 3])
        self.assertEqual(len(manifest['tensors'][0]['sha256']), 64)

        checkpoint = load_checkpoint(self.path)
        np.testing.assert_array_equal(checkpoint.tensors['a'], self.tensors['a'].data)
        np.testing.assert_array_equal(checkpoint.tensors['b'], self.tensors['b'].data)

    def test_checksum_mismatch(self):
        """
        Test that a modified blob is detected
        """
        save_checkpoint(self.path, 'flow', {}, self.tensors)
        blob_path = os.path.join(self.path, '0001.tensor')
        with open(blob_path, 'rb') as f:
            blob = bytearray(f.read())
        blob[-1] ^= 0x01
        with open(blob_path, 'wb') as f:
            f.write(bytes(blob))
        with self.assertRaises(ChecksumError):
            load_checkpoint(self.path)

    def test_version_mismatch(self):
        """
        Test that an unknown manifest version is rejected
        """
        save_checkpoint(self.path, 'flow', {}, self.tensors)
        manifest_file = os.path.join(self.path, 'manifest.yaml')
        with open(manifest_file) as f:
            manifest = yaml.safe_load(f)
        manifest['version'] = 2
        with open(manifest_file, 'w') as f:
            yaml.safe_dump(manifest, f)
        with self.assertRaises(VersionError):
            load_checkpoint(self.path)

    def test_missing_checkpoint(self):
        """
        Test that a directory without a manifest is rejected
        """
        with self.assertRaises(CheckpointError):
            load_checkpoint(os.path.join(self.temp_dir, 'nothing'))

    def test_failed_write_leaves_nothing(self):
        """
        Test that a write failing midway leaves no checkpoint or staging files
        """
        with self.assertRaises(CheckpointError):
            save_checkpoint(self.path, 'flow', {'bad': object()}, self.tensors)
        self.assertEqual(os.listdir(self.temp_dir), [])

    def test_overwrite(self):
        """
        Test that an existing checkpoint is replaced in full
        """
        save_checkpoint(self.path, 'flow', {}, self.tensors)
        save_checkpoint(self.path, 'flow', {}, {'c': Tensor(np.ones(1))})
        self.assertEqual(list(load_checkpoint(self.path).tensors), ['c'])
        self.assertEqual(sorted(os.listdir(self.path)), ['0000.tensor', 'manifest.yaml'])
        self.assertEqual(os.listdir(self.temp_dir), ['ckpt'])


class TestModelSerialization(unittest.TestCase):
    """
    Tests for serialize and deserialize
    """

    def setUp(self):
        """
        Set up the test
        """
        self.temp_dir = tempfile.mkdtemp()
        rng = np.random.default_rng(0)
        self.groups = [GroupedFeature(S=Tensor(rng.normal(size=(2, 2))), mask=np.array([True, i % 2 == 0]))
                       for i in range(4)]

    def tearDown(self):
        """
        Clean up after the test
        """
        shutil.rmtree(self.temp_dir)

    def test_flow(self):
        """
        Test that a restored flow scores groups identically
        """
        model = small_flow(seed=1)
        path = serialize(model, os.path.join(self.temp_dir, 'flow'))
        restored = deserialize(path)
        self.assertIsInstance(restored, FlowModel)
        self.assertEqual(restored.config, model.config)
        np.testing.assert_array_equal(restored.prior_stds, model.prior_stds)
        np.testing.assert_array_equal(predict_batch(self.groups, restored)[1], predict_batch(self.groups, model)[1])
        manifest = load_checkpoint(path).extra
        self.assertEqual(manifest['units'], 2)
        self.assertEqual(manifest['masks'][0], [[1, 1], [0, 0]])

    def test_temporal(self):
        """
        Test that a restored temporal model produces identical logits
        """
        config = TemporalConfig(feature_dim=2, max_faces=2, max_groups=2, hidden=3, units=2, filters=2,
                                residual_blocks=1, cell='lstm')
        model = TemporalModel.create(config, seed=2, identity=False)
        seq = FrameSequence(frames=[self.groups[:2], self.groups[2:3]], labels=['positive', 'neutral'],
                            video_label='neutral')
        restored = deserialize(serialize(model, os.path.join(self.temp_dir, 'temporal')))
        self.assertEqual(restored.config, config)
        for a, b in zip(sequence_logits([seq], model), sequence_logits([seq], restored)):
            np.testing.assert_array_equal(a.data, b.data)

    def test_baseline(self):
        """
        Test that a restored baseline predicts identically
        """
        baseline = create_baseline('average', 2, 2, seed=3)
        restored = deserialize(serialize(baseline, os.path.join(self.temp_dir, 'baseline')))
        self.assertEqual(restored.kind, 'average')
        np.testing.assert_array_equal(restored.predict(self.groups)[1], baseline.predict(self.groups)[1])

    def test_emonet(self):
        """
        Test that restored extractor parameters give the same features
        """
        cfg = toy_config(4)
        params = init_emonet_params(cfg, seed=4)
        restored_cfg, restored = deserialize(serialize((cfg, params), os.path.join(self.temp_dir, 'emonet')))
        self.assertEqual(restored_cfg, cfg)
        face = Tensor(np.random.default_rng(5).uniform(-1.0, 1.0, size=(16, 16, 1)))
        np.testing.assert_array_equal(emonet_forward(face, cfg, params).data,
                                      emonet_forward(face, restored_cfg, restored).data)

    def test_unsupported_object(self):
        """
        Test that arbitrary objects are refused
        """
        with self.assertRaises(CheckpointError):
            serialize({'weights': 1}, os.path.join(self.temp_dir, 'x'))


class TestCheckpointManager(unittest.TestCase):
    """
    Tests for the best and final checkpoints
    """

    def test_best_only_on_improvement(self):
        """
        Test that the best checkpoint follows strict improvements
        """
        with tempfile.TemporaryDirectory() as out:
            manager = CheckpointManager(out)
            model = small_flow()
            self.assertTrue(manager.save_if_best(model, 2.0))
            self.assertFalse(manager.save_if_best(model, 2.0))
            self.assertFalse(manager.save_if_best(model, 3.0))
            self.assertTrue(manager.save_if_best(model, 1.5))
            self.assertEqual(load_checkpoint(manager.path('best')).extra['loss'], 1.5)
            manager.save_final(model)
            self.assertTrue(os.path.isdir(manager.path('final')))


if __name__ == '__main__':
    unittest.main()
