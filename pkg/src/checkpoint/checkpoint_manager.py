#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Checkpoint Manager

A checkpoint is a directory holding ``manifest.yaml`` (format version, model
kind, configuration, and per-tensor file name, shape and sha256) and one
tensor blob per parameter. Checkpoints are staged in a temporary directory
next to the target and moved into place with a rename, so a failed write
leaves nothing behind.
"""

import hashlib
import logging
import os
import shutil
import tempfile
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import yaml

from src.emonet.emonet import EmoNetConfig, init_emonet_params
from src.errors import CheckpointError, ChecksumError, VersionError
from src.numeric_core.blob import decode_tensor, encode_tensor
from src.numeric_core.tensor import Tensor
from src.nvpf.baselines import create_baseline
from src.nvpf.flow import FlowConfig, FlowModel
from src.tnvpf.temporal import TemporalConfig, TemporalModel

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
MANIFEST_NAME = "manifest.yaml"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class Checkpoint:
    kind: str
    config: Dict[str, Any]
    tensors: "OrderedDict[str, np.ndarray]"
    extra: Dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path: str, kind: str, config: Dict[str, Any], tensors: Dict[str, Tensor],
                    extra: Optional[Dict[str, Any]] = None) -> str:
    """
    Write a checkpoint directory atomically

    Args:
        path: Target directory; replaced if it exists
        kind: Model kind recorded in the manifest
        config: Model configuration
        tensors: Named tensors to store
        extra: Additional manifest fields

    Returns:
        The checkpoint path
    """
    if not path:
        raise CheckpointError("checkpoint path is empty")
    target = os.path.abspath(path)
    parent = os.path.dirname(target)
    try:
        os.makedirs(parent, exist_ok=True)
        staging = tempfile.mkdtemp(prefix=".tmpckpt-", dir=parent)
    except OSError as e:
        raise CheckpointError(f"cannot create checkpoint at {path}: {e}") from None

    try:
        entries = []
        for index, (name, tensor) in enumerate(tensors.items()):
            blob = encode_tensor(tensor)
            file_name = f"{index:04d}.tensor"
            with open(os.path.join(staging, file_name), "wb") as f:
                f.write(blob)
            entries.append({"name": name, "file": file_name, "shape": list(tensor.shape), "sha256": _sha256(blob)})
        manifest = {
            "version": CHECKPOINT_VERSION,
            "kind": kind,
            "config": config,
            "extra": extra or {},
            "tensors": entries,
        }
        with open(os.path.join(staging, MANIFEST_NAME), "w") as f:
            yaml.safe_dump(manifest, f, default_flow_style=False, sort_keys=False)

        if os.path.exists(target):
            retired = tempfile.mkdtemp(prefix=".oldckpt-", dir=parent)
            os.replace(target, os.path.join(retired, "old"))
            os.replace(staging, target)
            shutil.rmtree(retired, ignore_errors=True)
        else:
            os.replace(staging, target)
    except Exception as e:
        shutil.rmtree(staging, ignore_errors=True)
        if isinstance(e, CheckpointError):
            raise
        raise CheckpointError(f"failed to write checkpoint {path}: {e}") from e

    logger.debug("Wrote %s checkpoint with %d tensors to %s", kind, len(tensors), path)
    return path


def load_checkpoint(path: str) -> Checkpoint:
    """
    Read and verify a checkpoint directory

    Raises:
        CheckpointError: If the manifest or a blob is missing or malformed
        VersionError: If the manifest version is not supported
        ChecksumError: If a blob does not match its recorded sha256
    """
    manifest_file = os.path.join(path, MANIFEST_NAME)
    try:
        with open(manifest_file, "r") as f:
            manifest = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise CheckpointError(f"cannot read checkpoint manifest {manifest_file}: {e}") from None
    if not isinstance(manifest, dict) or "version" not in manifest:
        raise CheckpointError(f"malformed checkpoint manifest {manifest_file}")
    if manifest["version"] != CHECKPOINT_VERSION:
        raise VersionError(f"checkpoint version {manifest['version']} is not supported (expected {CHECKPOINT_VERSION})")

    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for entry in manifest.get("tensors", []):
        blob_path = os.path.join(path, entry["file"])
        try:
            with open(blob_path, "rb") as f:
                blob = f.read()
        except OSError as e:
            raise CheckpointError(f"cannot read tensor {entry['name']}: {e}") from None
        if _sha256(blob) != entry["sha256"]:
            raise ChecksumError(f"checksum mismatch for tensor {entry['name']} ({entry['file']})")
        tensors[entry["name"]] = decode_tensor(blob).data
    return Checkpoint(kind=manifest["kind"], config=manifest.get("config") or {}, tensors=tensors,
                      extra=manifest.get("extra") or {})


# Model-level serialization


def _flow_tensors(model: FlowModel, prefix: str = "") -> "OrderedDict[str, Tensor]":
    tensors: "OrderedDict[str, Tensor]" = OrderedDict()
    for name, value in model.parameters().items():
        tensors[f"{prefix}{name}"] = value
    tensors[f"{prefix}prior.means"] = Tensor(model.prior_means)
    tensors[f"{prefix}prior.stds"] = Tensor(model.prior_stds)
    return tensors


def _flow_summary(model: FlowModel) -> Dict[str, Any]:
    return {
        "units": len(model.units),
        "masks": [unit.mask.astype(int).tolist() for unit in model.units],
    }


def _restore_flow(config: FlowConfig, arrays: Dict[str, np.ndarray], prefix: str = "") -> FlowModel:
    model = FlowModel.create(config)
    model.load_parameters({name[len(prefix):]: value for name, value in arrays.items() if name.startswith(prefix)})
    model.set_priors(arrays[f"{prefix}prior.means"], arrays[f"{prefix}prior.stds"])
    return model


ModelLike = Union[FlowModel, TemporalModel, Tuple[EmoNetConfig, Dict[str, Tensor]], Any]


def serialize(model: ModelLike, path: str, extra: Optional[Dict[str, Any]] = None) -> str:
    """
    Write a flow, temporal model, baseline or (EmoNet config, params) pair

    Args:
        model: The model
        path: Checkpoint directory
        extra: Additional manifest fields

    Returns:
        The checkpoint path
    """
    extra = dict(extra or {})
    if isinstance(model, FlowModel):
        extra.update(_flow_summary(model))
        return save_checkpoint(path, "flow", model.config.to_dict(), _flow_tensors(model), extra)
    if isinstance(model, TemporalModel):
        tensors = OrderedDict(model.parameters())
        for scope, flow in (("group_flow", model.group_flow), ("frame_flow", model.frame_flow)):
            tensors[f"{scope}.prior.means"] = Tensor(flow.prior_means)
            tensors[f"{scope}.prior.stds"] = Tensor(flow.prior_stds)
        extra["group_flow"] = _flow_summary(model.group_flow)
        extra["frame_flow"] = _flow_summary(model.frame_flow)
        return save_checkpoint(path, "temporal", model.config.to_dict(), tensors, extra)
    if isinstance(model, tuple) and isinstance(model[0], EmoNetConfig):
        cfg, params = model
        return save_checkpoint(path, "emonet", cfg.to_dict(), params, extra)
    if hasattr(model, "kind") and hasattr(model, "parameters"):
        config = {"baseline": model.kind, "rows": model.rows, "cols": model.cols}
        return save_checkpoint(path, "baseline", config, model.parameters(), extra)
    raise CheckpointError(f"cannot serialize object of type {type(model).__name__}")


def deserialize(path: str) -> ModelLike:
    """
    Rebuild a model written by ``serialize``

    Returns:
        FlowModel, TemporalModel, baseline, or an (EmoNetConfig, params) pair
    """
    checkpoint = load_checkpoint(path)
    arrays = checkpoint.tensors
    if checkpoint.kind == "flow":
        return _restore_flow(FlowConfig.from_dict(checkpoint.config), arrays)
    if checkpoint.kind == "temporal":
        config = TemporalConfig.from_dict(checkpoint.config)
        model = TemporalModel.create(config)
        model.load_parameters(arrays)
        for scope, flow in (("group_flow", model.group_flow), ("frame_flow", model.frame_flow)):
            flow.set_priors(arrays[f"{scope}.prior.means"], arrays[f"{scope}.prior.stds"])
        return model
    if checkpoint.kind == "emonet":
        cfg = EmoNetConfig.from_dict(checkpoint.config)
        params = init_emonet_params(cfg, zero=True)
        for name, tensor in params.items():
            tensor.data = np.array(arrays[name])
        return cfg, params
    if checkpoint.kind == "baseline":
        config = checkpoint.config
        baseline = create_baseline(config["baseline"], config["rows"], config["cols"])
        for name, tensor in baseline.params.items():
            tensor.data = np.array(arrays[name])
        return baseline
    raise CheckpointError(f"unknown checkpoint kind {checkpoint.kind!r}")


class CheckpointManager:
    """
    Writes the ``final`` and ``best`` checkpoints of a training run
    """

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.best_loss = float("inf")

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def save_final(self, model: ModelLike, extra: Optional[Dict[str, Any]] = None) -> str:
        path = serialize(model, self.path("final"), extra)
        logger.info("Checkpoint written: %s", path)
        return path

    def save_if_best(self, model: ModelLike, loss: float, extra: Optional[Dict[str, Any]] = None) -> bool:
        """
        Write the ``best`` checkpoint when ``loss`` improves on every earlier call

        Returns:
            True if a checkpoint was written
        """
        if not loss < self.best_loss:
            return False
        self.best_loss = loss
        serialize(model, self.path("best"), dict(extra or {}, loss=float(loss)))
        return True
