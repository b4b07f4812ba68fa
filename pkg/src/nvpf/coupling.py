#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Affine Coupling Units

A coupling unit holds the cells selected by its binary mask fixed and applies
a scale and a translation to the remaining valid cells, both computed from the
fixed part by small residual convolutional networks that see S as a one-channel
M×N feature map. Padded columns are excluded from the transform and from the
log-determinant.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import ConfigError, DivergenceError, ShapeError
from src.numeric_core.conv import conv2d
from src.numeric_core.tensor import (
    Tensor,
    add,
    as_tensor,
    broadcast_to,
    concat,
    exp,
    mul,
    neg,
    parameter,
    reduce_sum,
    relu,
    reshape,
    sub,
    tanh,
)

logger = logging.getLogger(__name__)

SUBNETS = ("scale", "translate")


@dataclass
class CouplingUnit:
    """
    One invertible unit: binary mask plus the scale and translation networks

    ``params`` is keyed ``scale.*`` and ``translate.*``.
    """

    mask: np.ndarray
    params: Dict[str, Tensor]
    residual_blocks: int = 2
    scale_bound: float = 2.0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mask.shape


def half_mask(rows: int, cols: int) -> np.ndarray:
    """
    Mask with its first half set: the top rows, or the left columns of a
    single-row grid
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ConfigError(f"a coupling mask needs at least two cells, got {rows}×{cols}")
    mask = np.zeros((rows, cols))
    if rows > 1:
        mask[: rows // 2, :] = 1.0
    else:
        mask[:, : cols // 2] = 1.0
    return mask


def alternating_masks(rows: int, cols: int, count: int) -> List[np.ndarray]:
    """Masks for ``count`` consecutive units, each the complement of the previous"""
    first = half_mask(rows, cols)
    return [first if k % 2 == 0 else 1.0 - first for k in range(count)]


def _glorot(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    kh, kw, c_in, c_out = shape
    limit = np.sqrt(6.0 / (kh * kw * (c_in + c_out)))
    return rng.uniform(-limit, limit, size=shape)


def init_subnet(filters: int, residual_blocks: int, rng: Optional[np.random.Generator] = None,
                zero_output: bool = True) -> "OrderedDict[str, Tensor]":
    """
    Parameters of one residual convolutional subnetwork

    Args:
        filters: Feature maps per hidden layer
        residual_blocks: Number of two-convolution residual blocks
        rng: Generator for Glorot-uniform weights; None gives all zeros
        zero_output: Zero the output convolution so the unit starts as identity

    Returns:
        Ordered parameter mapping
    """
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    shapes["conv_in.weight"] = (3, 3, 2, filters)
    shapes["conv_in.bias"] = (filters,)
    for j in range(residual_blocks):
        for part in ("conv_a", "conv_b"):
            shapes[f"block{j}.{part}.weight"] = (3, 3, filters, filters)
            shapes[f"block{j}.{part}.bias"] = (filters,)
    shapes["conv_out.weight"] = (3, 3, filters, 1)
    shapes["conv_out.bias"] = (1,)

    params: "OrderedDict[str, Tensor]" = OrderedDict()
    for name, shape in shapes.items():
        if rng is None or name.endswith("bias") or (zero_output and name.startswith("conv_out")):
            data = np.zeros(shape)
        else:
            data = _glorot(rng, shape)
        params[name] = parameter(data)
    return params


def init_coupling_unit(mask: np.ndarray, filters: int = 32, residual_blocks: int = 2,
                       rng: Optional[np.random.Generator] = None, zero_output: bool = True,
                       scale_bound: float = 2.0) -> CouplingUnit:
    params: Dict[str, Tensor] = OrderedDict()
    for subnet in SUBNETS:
        for name, value in init_subnet(filters, residual_blocks, rng, zero_output).items():
            params[f"{subnet}.{name}"] = value
    return CouplingUnit(mask=np.asarray(mask, dtype=float), params=params,
                        residual_blocks=residual_blocks, scale_bound=scale_bound)


def _conv(x: Tensor, params: Dict[str, Tensor], prefix: str) -> Tensor:
    y = conv2d(x, params[f"{prefix}.weight"])
    return add(y, broadcast_to(params[f"{prefix}.bias"], y.shape))


def subnet_forward(x: Tensor, params: Dict[str, Tensor], prefix: str, residual_blocks: int) -> Tensor:
    """
    Residual convolutional network on a B×M×N×2 input, returning B×M×N
    """
    h = relu(_conv(x, params, f"{prefix}.conv_in"))
    for j in range(residual_blocks):
        inner = relu(_conv(h, params, f"{prefix}.block{j}.conv_a"))
        h = relu(add(h, _conv(inner, params, f"{prefix}.block{j}.conv_b")))
    out = _conv(h, params, f"{prefix}.conv_out")
    return reshape(out, out.shape[:3])


def valid_cells(column_mask: Optional[np.ndarray], batch: int, rows: int, cols: int) -> np.ndarray:
    """
    Expand a per-column validity mask (N or B×N) to B×M×N cell weights
    """
    if column_mask is None:
        return np.ones((batch, rows, cols))
    column_mask = np.asarray(column_mask, dtype=float)
    if column_mask.ndim == 1 and column_mask.shape == (cols,):
        column_mask = np.broadcast_to(column_mask, (batch, cols))
    if column_mask.shape != (batch, cols):
        raise ShapeError(f"column mask shape {column_mask.shape} does not match batch {batch} × {cols} columns")
    return np.repeat(column_mask[:, None, :], rows, axis=1)


def _as_batch(S: Tensor, unit: CouplingUnit) -> Tuple[Tensor, bool]:
    S = as_tensor(S)
    if S.shape == unit.shape:
        return reshape(S, (1,) + S.shape), False
    if S.ndim == 3 and S.shape[1:] == unit.shape:
        return S, True
    raise ShapeError(f"coupling input shape {S.shape} does not match mask shape {unit.shape}")


def scale_and_translation(fixed: Tensor, valid: np.ndarray, unit: CouplingUnit) -> Tuple[Tensor, Tensor]:
    """
    Bounded log-scale and translation computed from the fixed cells

    Args:
        fixed: B×M×N input with every non-fixed cell zeroed
        valid: B×M×N cell validity
        unit: The coupling unit

    Returns:
        (log-scale, translation), each B×M×N
    """
    shape = fixed.shape + (1,)
    x = concat([reshape(fixed, shape), Tensor(valid.reshape(shape))], axis=3)
    raw = subnet_forward(x, unit.params, "scale", unit.residual_blocks)
    if not np.all(np.isfinite(raw.data)):
        raise DivergenceError("coupling scale network produced non-finite values")
    log_scale = mul(tanh(raw), unit.scale_bound)
    translation = subnet_forward(x, unit.params, "translate", unit.residual_blocks)
    return log_scale, translation


def _log_det(active_log_scale: Tensor) -> Tensor:
    batch = active_log_scale.shape[0]
    return reduce_sum(reshape(active_log_scale, (batch, -1)), axis=1)


def coupling_forward(S: Tensor, unit: CouplingUnit,
                     column_mask: Optional[np.ndarray] = None) -> Tuple[Tensor, Tensor]:
    """
    Apply one coupling unit

    Args:
        S: M×N input, or B×M×N
        unit: The coupling unit
        column_mask: Valid columns (N or B×N); all valid when None

    Returns:
        (Y, log_det): Y has the shape of S; log_det is a 0-d tensor, or B
        values for a batch
    """
    batch, batched = _as_batch(S, unit)
    b, rows, cols = batch.shape[0], unit.shape[0], unit.shape[1]
    valid = valid_cells(column_mask, b, rows, cols)
    fixed_cells = unit.mask[None] * valid
    active = (1.0 - unit.mask[None]) * valid

    log_scale, translation = scale_and_translation(mul(batch, fixed_cells), valid, unit)
    active_log_scale = mul(log_scale, active)
    Y = add(mul(batch, exp(active_log_scale)), mul(translation, active))
    log_det = _log_det(active_log_scale)
    if batched:
        return Y, log_det
    return reshape(Y, unit.shape), reshape(log_det, ())


def coupling_inverse(Y: Tensor, unit: CouplingUnit, column_mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Invert one coupling unit

    Args:
        Y: M×N output of ``coupling_forward``, or B×M×N
        unit: The coupling unit
        column_mask: The column mask used in the forward pass

    Returns:
        S with the shape of Y
    """
    batch, batched = _as_batch(Y, unit)
    b, rows, cols = batch.shape[0], unit.shape[0], unit.shape[1]
    valid = valid_cells(column_mask, b, rows, cols)
    fixed_cells = unit.mask[None] * valid
    active = (1.0 - unit.mask[None]) * valid

    log_scale, translation = scale_and_translation(mul(batch, fixed_cells), valid, unit)
    shifted = sub(batch, mul(translation, active))
    S = mul(shifted, exp(neg(mul(log_scale, active))))
    return S if batched else reshape(S, unit.shape)
