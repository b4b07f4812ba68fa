#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
EmoNet Feature Extractor

This module builds the lightweight facial feature extractor: a stem of
standard and depthwise convolutions, a sequence of bottleneck blocks
(1×1 expand, 3×3 depthwise, 1×1 linear project, with a residual skip when the
stride is 1), a 1×1 convolution, a per-channel spatial fully connected layer
and a dense layer producing the M-dimensional individual feature.

Batch normalization is replaced by a per-channel affine scale and shift.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.errors import ConfigError, ShapeError
from src.numeric_core.conv import conv2d, same_padding
from src.numeric_core.tensor import (
    Tensor,
    add,
    broadcast_to,
    matmul,
    mul,
    parameter,
    reduce_sum,
    relu,
    reshape,
)

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]
Params = Dict[str, Tensor]


@dataclass
class ConvConfig:
    """
    Standard or depthwise convolution layer descriptor
    """

    kernel: int
    stride: int
    in_channels: int
    out_channels: int
    depthwise: bool = False
    activation: bool = True
    affine: bool = True
    bias: bool = False
    name: str = "conv"

    def validate(self) -> None:
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"{self.name}: kernel must be a positive odd integer")
        if self.stride not in (1, 2):
            raise ConfigError(f"{self.name}: stride must be 1 or 2")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigError(f"{self.name}: channel counts must be positive")
        if self.depthwise and self.out_channels % self.in_channels:
            raise ConfigError(f"{self.name}: depthwise output channels must be a multiple of the input channels")

    def output_shape(self, shape: Shape) -> Shape:
        return (-(-shape[0] // self.stride), -(-shape[1] // self.stride), self.out_channels)


@dataclass
class BottleneckConfig:
    """
    Bottleneck block descriptor

    A residual block has stride 1 and equal input and output channels; a block
    with stride 2 never has a residual connection.
    """

    expansion_factor: int
    stride: int
    in_channels: int
    out_channels: int
    residual: bool
    name: str = "bottleneck"

    @property
    def hidden_channels(self) -> int:
        return self.expansion_factor * self.in_channels

    def validate(self) -> None:
        if self.expansion_factor < 1:
            raise ConfigError(f"{self.name}: expansion_factor must be positive")
        if self.stride not in (1, 2):
            raise ConfigError(f"{self.name}: stride must be 1 or 2")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigError(f"{self.name}: channel counts must be positive")
        if self.residual != (self.stride == 1):
            raise ConfigError(f"{self.name}: residual blocks have stride 1 and only those")
        if self.residual and self.in_channels != self.out_channels:
            raise ConfigError(f"{self.name}: residual blocks need equal input and output channels")

    def output_shape(self, shape: Shape) -> Shape:
        return (-(-shape[0] // self.stride), -(-shape[1] // self.stride), self.out_channels)


Layer = Union[ConvConfig, BottleneckConfig]


@dataclass
class EmoNetConfig:
    """
    Full extractor description: input size, ordered layers and feature size
    """

    input_size: Tuple[int, int, int]
    blocks: List[Layer] = field(default_factory=list)
    feature_dim: int = 64
    num_classes: Optional[int] = None

    def validate(self) -> None:
        """
        Check every layer and the consistency of the shape chain

        Raises:
            ConfigError: If a layer is invalid or its input channels do not
                         match the previous layer's output
        """
        if len(self.input_size) != 3 or min(self.input_size) < 1:
            raise ConfigError(f"input_size must be (h, w, channels), got {self.input_size}")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be positive")
        if not self.blocks:
            raise ConfigError("EmoNet needs at least one layer")
        shape: Shape = tuple(self.input_size)
        for layer in self.blocks:
            layer.validate()
            if layer.in_channels != shape[2]:
                raise ConfigError(
                    f"{layer.name}: expects {layer.in_channels} input channels, previous layer gives {shape[2]}"
                )
            shape = layer.output_shape(shape)

    def to_dict(self) -> Dict[str, Any]:
        blocks = []
        for layer in self.blocks:
            entry = dict(layer.__dict__)
            entry["type"] = "bottleneck" if isinstance(layer, BottleneckConfig) else "conv"
            blocks.append(entry)
        return {
            "input_size": list(self.input_size),
            "blocks": blocks,
            "feature_dim": self.feature_dim,
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EmoNetConfig":
        """
        Build a configuration from its dictionary form

        Bottleneck entries may carry ``repeat: n``; the first block of such a
        stage uses the given stride and the remaining ones are stride-1
        residual blocks at the stage's output width.

        Args:
            data: Dictionary with input_size, blocks, feature_dim and
                  optionally num_classes

        Returns:
            The validated configuration
        """
        try:
            blocks: List[Layer] = []
            for index, entry in enumerate(data["blocks"]):
                entry = dict(entry)
                kind = entry.pop("type", "conv")
                repeat = int(entry.pop("repeat", 1))
                name = entry.pop("name", f"{kind}{index + 1}")
                if kind == "conv":
                    blocks.append(ConvConfig(name=name, **entry))
                elif kind == "bottleneck":
                    stride = int(entry["stride"])
                    entry.setdefault("residual", stride == 1)
                    first = BottleneckConfig(name=f"{name}.0" if repeat > 1 else name, **entry)
                    blocks.append(first)
                    for j in range(1, repeat):
                        blocks.append(
                            BottleneckConfig(
                                expansion_factor=first.expansion_factor,
                                stride=1,
                                in_channels=first.out_channels,
                                out_channels=first.out_channels,
                                residual=True,
                                name=f"{name}.{j}",
                            )
                        )
                else:
                    raise ConfigError(f"unknown layer type {kind!r}")
            config = cls(
                input_size=tuple(data["input_size"]),
                blocks=blocks,
                feature_dim=int(data.get("feature_dim", 64)),
                num_classes=data.get("num_classes"),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"invalid EmoNet configuration: {e}") from None
        config.validate()
        return config


def full_config(feature_dim: int = 64, num_classes: Optional[int] = None) -> EmoNetConfig:
    """
    Full-size extractor for 112×112×3 aligned faces

    Args:
        feature_dim: Size M of the output feature
        num_classes: Size of the optional classification head

    Returns:
        The configuration
    """
    return EmoNetConfig.from_dict({
        "input_size": [112, 112, 3],
        "feature_dim": feature_dim,
        "num_classes": num_classes,
        "blocks": [
            {"type": "conv", "name": "conv1", "kernel": 3, "stride": 2, "in_channels": 3, "out_channels": 64},
            {"type": "conv", "name": "dwconv1", "kernel": 3, "stride": 1, "in_channels": 64, "out_channels": 64,
             "depthwise": True},
            {"type": "bottleneck", "name": "bottleneck1", "expansion_factor": 2, "stride": 2,
             "in_channels": 64, "out_channels": 64, "repeat": 2},
            {"type": "bottleneck", "name": "bottleneck2", "expansion_factor": 2, "stride": 2,
             "in_channels": 64, "out_channels": 128, "repeat": 4},
            {"type": "bottleneck", "name": "bottleneck3", "expansion_factor": 2, "stride": 1,
             "in_channels": 128, "out_channels": 128, "repeat": 2},
            {"type": "bottleneck", "name": "bottleneck4", "expansion_factor": 2, "stride": 2,
             "in_channels": 128, "out_channels": 128, "repeat": 4},
            {"type": "bottleneck", "name": "bottleneck5", "expansion_factor": 2, "stride": 1,
             "in_channels": 128, "out_channels": 128, "repeat": 2},
            {"type": "conv", "name": "conv2", "kernel": 1, "stride": 1, "in_channels": 128, "out_channels": 512},
        ],
    })


def toy_config(feature_dim: int = 8, num_classes: Optional[int] = None) -> EmoNetConfig:
    """
    Two-block extractor for 16×16 single-channel inputs
    """
    return EmoNetConfig.from_dict({
        "input_size": [16, 16, 1],
        "feature_dim": feature_dim,
        "num_classes": num_classes,
        "blocks": [
            {"type": "conv", "name": "conv1", "kernel": 3, "stride": 2, "in_channels": 1, "out_channels": 8},
            {"type": "bottleneck", "name": "bottleneck1", "expansion_factor": 2, "stride": 2,
             "in_channels": 8, "out_channels": 8, "repeat": 2},
            {"type": "conv", "name": "conv2", "kernel": 1, "stride": 1, "in_channels": 8, "out_channels": 16},
        ],
    })


def shape_chain(cfg: EmoNetConfig) -> List[Tuple[str, Shape, Shape]]:
    """
    List the input and output shape of every layer

    Args:
        cfg: Extractor configuration

    Returns:
        (layer name, input shape, output shape) triples, ending with the
        spatial fully connected layer ``embedding`` and the dense ``feature``
    """
    cfg.validate()
    chain = []
    shape: Shape = tuple(cfg.input_size)
    for layer in cfg.blocks:
        out = layer.output_shape(shape)
        chain.append((layer.name, shape, out))
        shape = out
    channels = shape[2]
    chain.append(("embedding", shape, (1, 1, channels)))
    chain.append(("feature", (1, 1, channels), (cfg.feature_dim,)))
    if cfg.num_classes:
        chain.append(("classifier", (cfg.feature_dim,), (cfg.num_classes,)))
    return chain


# Parameter layout


def _conv_specs(layer: ConvConfig, prefix: str) -> "OrderedDict[str, Tuple[Shape, str, int, int]]":
    k = layer.kernel
    specs: "OrderedDict[str, Tuple[Shape, str, int, int]]" = OrderedDict()
    if layer.depthwise:
        multiplier = layer.out_channels // layer.in_channels
        specs[f"{prefix}weight"] = ((k, k, layer.in_channels, multiplier), "weight", k * k, k * k * multiplier)
    else:
        specs[f"{prefix}weight"] = (
            (k, k, layer.in_channels, layer.out_channels), "weight",
            k * k * layer.in_channels, k * k * layer.out_channels,
        )
    if layer.affine:
        specs[f"{prefix}scale"] = ((layer.out_channels,), "scale", 0, 0)
        specs[f"{prefix}shift"] = ((layer.out_channels,), "shift", 0, 0)
    if layer.bias:
        specs[f"{prefix}bias"] = ((layer.out_channels,), "bias", 0, 0)
    return specs


def _bottleneck_parts(block: BottleneckConfig) -> List[Tuple[str, ConvConfig]]:
    hidden = block.hidden_channels
    return [
        ("expand", ConvConfig(1, 1, block.in_channels, hidden, activation=True, name=f"{block.name}.expand")),
        ("depthwise", ConvConfig(3, block.stride, hidden, hidden, depthwise=True, activation=True,
                                 name=f"{block.name}.depthwise")),
        ("project", ConvConfig(1, 1, hidden, block.out_channels, activation=False, name=f"{block.name}.project")),
    ]


def _layer_specs(layer: Layer, prefix: str = "") -> "OrderedDict[str, Tuple[Shape, str, int, int]]":
    if isinstance(layer, ConvConfig):
        return _conv_specs(layer, prefix)
    specs: "OrderedDict[str, Tuple[Shape, str, int, int]]" = OrderedDict()
    for part, conv in _bottleneck_parts(layer):
        specs.update(_conv_specs(conv, f"{prefix}{part}."))
    return specs


def _param_specs(cfg: EmoNetConfig) -> "OrderedDict[str, Tuple[Shape, str, int, int]]":
    specs: "OrderedDict[str, Tuple[Shape, str, int, int]]" = OrderedDict()
    for layer in cfg.blocks:
        specs.update(_layer_specs(layer, f"{layer.name}."))
    h, w, channels = [entry for entry in shape_chain(cfg) if entry[0] == "embedding"][0][1]
    specs["embedding.weight"] = ((h, w, channels), "weight", h * w, 1)
    specs["embedding.bias"] = ((channels,), "bias", 0, 0)
    specs["feature.weight"] = ((channels, cfg.feature_dim), "weight", channels, cfg.feature_dim)
    specs["feature.bias"] = ((cfg.feature_dim,), "bias", 0, 0)
    if cfg.num_classes:
        specs["classifier.weight"] = ((cfg.feature_dim, cfg.num_classes), "weight", cfg.feature_dim, cfg.num_classes)
        specs["classifier.bias"] = ((cfg.num_classes,), "bias", 0, 0)
    return specs


def param_count(cfg: Union[EmoNetConfig, ConvConfig, BottleneckConfig]) -> int:
    """
    Count trainable parameters

    Args:
        cfg: A whole extractor configuration or a single layer descriptor

    Returns:
        Exact number of trainable values (weights, affine terms and biases)
    """
    specs = _param_specs(cfg) if isinstance(cfg, EmoNetConfig) else _layer_specs(cfg)
    return int(sum(np.prod(shape) for shape, _, _, _ in specs.values()))


def glorot_uniform(rng: np.random.Generator, shape: Shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_emonet_params(cfg: EmoNetConfig, seed: int = 0, zero: bool = False) -> Params:
    """
    Create the extractor parameters

    Args:
        cfg: Extractor configuration
        seed: Seed for the Glorot-uniform weight draw
        zero: Set every parameter to zero instead

    Returns:
        Ordered mapping from parameter name to trainable tensor
    """
    rng = np.random.default_rng(seed)
    params: Params = OrderedDict()
    for name, (shape, kind, fan_in, fan_out) in _param_specs(cfg).items():
        if zero:
            data = np.zeros(shape)
        elif kind == "weight":
            data = glorot_uniform(rng, shape, fan_in, fan_out)
        elif kind == "scale":
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        params[name] = parameter(data)
    return params


def _sub_params(params: Params, prefix: str) -> Params:
    return {name[len(prefix):]: value for name, value in params.items() if name.startswith(prefix)}


def _channel_affine(x: Tensor, params: Params, prefix: str) -> Tensor:
    if f"{prefix}scale" in params:
        x = add(mul(x, broadcast_to(params[f"{prefix}scale"], x.shape)), broadcast_to(params[f"{prefix}shift"], x.shape))
    if f"{prefix}bias" in params:
        x = add(x, broadcast_to(params[f"{prefix}bias"], x.shape))
    return x


def conv_layer_forward(x: Tensor, cfg: ConvConfig, params: Params, prefix: str = "") -> Tensor:
    """
    Convolution followed by the per-channel affine term and optional ReLU
    """
    if x.shape[-1] != cfg.in_channels:
        raise ShapeError(f"{cfg.name}: expected {cfg.in_channels} channels, got {x.shape[-1]}")
    y = conv2d(x, params[f"{prefix}weight"], cfg.stride, cfg.depthwise)
    y = _channel_affine(y, params, prefix)
    return relu(y) if cfg.activation else y


def bottleneck_forward(x: Tensor, cfg: BottleneckConfig, params: Params) -> Tensor:
    """
    Apply one bottleneck block

    Args:
        x: Feature map h×w×c (or with a leading batch axis)
        cfg: Block descriptor
        params: Block parameters keyed ``expand.*``, ``depthwise.*``, ``project.*``

    Returns:
        Feature map of spatial extent ceil(h/s)×ceil(w/s) with c₁ channels
    """
    cfg.validate()
    if x.ndim not in (3, 4) or x.shape[-1] != cfg.in_channels:
        raise ShapeError(f"{cfg.name}: expected {cfg.in_channels} input channels, got shape {x.shape}")
    y = x
    for part, conv in _bottleneck_parts(cfg):
        y = conv_layer_forward(y, conv, params, f"{part}.")
    return add(y, x) if cfg.residual else y


def _check_input(face: Tensor, cfg: EmoNetConfig) -> bool:
    size = tuple(cfg.input_size)
    if face.shape == size:
        return False
    if face.ndim == 4 and face.shape[1:] == size:
        return True
    raise ShapeError(f"EmoNet expects input {size}, got {face.shape}")


def _features(face: Tensor, cfg: EmoNetConfig, params: Params) -> Tensor:
    batched = _check_input(face, cfg)
    x = face if batched else reshape(face, (1,) + face.shape)
    for layer in cfg.blocks:
        if isinstance(layer, BottleneckConfig):
            x = bottleneck_forward(x, layer, _sub_params(params, f"{layer.name}."))
        else:
            x = conv_layer_forward(x, layer, params, f"{layer.name}.")
    batch, h, w, channels = x.shape
    pooled = mul(x, broadcast_to(params["embedding.weight"], x.shape))
    pooled = reduce_sum(reshape(pooled, (batch, h * w, channels)), axis=1)
    pooled = add(pooled, broadcast_to(params["embedding.bias"], pooled.shape))
    feature = matmul(pooled, params["feature.weight"])
    return add(feature, broadcast_to(params["feature.bias"], feature.shape))


def emonet_forward(face: Tensor, cfg: EmoNetConfig, params: Params) -> Tensor:
    """
    Extract the individual feature of one face (or a batch of faces)

    Args:
        face: Tensor of shape cfg.input_size, or B×input_size
        cfg: Extractor configuration
        params: Parameters from ``init_emonet_params`` or a checkpoint

    Returns:
        Feature vector of length M (B×M for a batch)
    """
    batched = _check_input(face, cfg)
    feature = _features(face, cfg, params)
    return feature if batched else reshape(feature, (cfg.feature_dim,))


def emonet_classify(face: Tensor, cfg: EmoNetConfig, params: Params) -> Tensor:
    """
    Face-level class logits from the optional classification head

    Args:
        face: Tensor of shape cfg.input_size, or B×input_size
        cfg: Extractor configuration with ``num_classes`` set
        params: Parameters including ``classifier.*``

    Returns:
        Logits of length num_classes (B×num_classes for a batch)
    """
    if not cfg.num_classes:
        raise ConfigError("EmoNet configuration has no classification head")
    batched = _check_input(face, cfg)
    feature = _features(face, cfg, params)
    logits = matmul(feature, params["classifier.weight"])
    logits = add(logits, broadcast_to(params["classifier.bias"], logits.shape))
    return logits if batched else reshape(logits, (cfg.num_classes,))
