#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Gated Recurrent Cell

One step of the gated recurrence over frame-level fused features:

    z_t = σ(W_z H^t + U_z o_{t−1})
    r_t = σ(W_r H^t + U_r o_{t−1})
    o_t = (1 − z_t) o_{t−1} + z_t tanh(W H^t + U (r_t ⊙ o_{t−1}))

and the hidden-to-output map producing per-frame class logits. Matrices are
stored input-major (d_in×d_h, d_h×d_h, d_h×C) and applied as row-vector
products so that a batch of sequences runs as a B×d matrix.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, fields
from typing import Dict, Optional

import numpy as np

from src.errors import ShapeError
from src.numeric_core.tensor import (
    Tensor,
    add,
    as_tensor,
    broadcast_to,
    matmul,
    mul,
    parameter,
    reshape,
    sigmoid,
    softmax,
    sub,
    tanh,
)
from src.synthdata.labels import GROUP_CLASSES

logger = logging.getLogger(__name__)


@dataclass
class GruParams:
    W: Tensor
    U: Tensor
    W_z: Tensor
    U_z: Tensor
    W_r: Tensor
    U_r: Tensor
    W_h: Tensor
    b_h: Tensor

    @property
    def d_in(self) -> int:
        return self.W.shape[0]

    @property
    def d_h(self) -> int:
        return self.U.shape[0]

    def validate(self) -> None:
        d_in, d_h, c = self.d_in, self.d_h, len(GROUP_CLASSES)
        expected = {
            "W": (d_in, d_h), "U": (d_h, d_h),
            "W_z": (d_in, d_h), "U_z": (d_h, d_h),
            "W_r": (d_in, d_h), "U_r": (d_h, d_h),
            "W_h": (d_h, c), "b_h": (c,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"GRU parameter {name}: expected {shape}, got {getattr(self, name).shape}")

    def named(self) -> "OrderedDict[str, Tensor]":
        return OrderedDict((f.name, getattr(self, f.name)) for f in fields(self))

    @classmethod
    def from_named(cls, params: Dict[str, Tensor]) -> "GruParams":
        result = cls(**{f.name: params[f.name] for f in fields(cls)})
        result.validate()
        return result


@dataclass
class GruState:
    """Activation carried between steps: d_h, or B×d_h for a batch"""

    o: Tensor


def init_gru_params(d_in: int, d_h: int, seed: int = 0, zero: bool = False) -> GruParams:
    """
    Create GRU parameters

    Args:
        d_in: Input width
        d_h: Hidden width
        seed: Seed for Glorot-uniform weights
        zero: All parameters zero instead

    Returns:
        The parameters
    """
    rng = np.random.default_rng(seed)
    c = len(GROUP_CLASSES)

    def draw(rows: int, cols: int) -> Tensor:
        if zero:
            return parameter(np.zeros((rows, cols)))
        limit = np.sqrt(6.0 / (rows + cols))
        return parameter(rng.uniform(-limit, limit, size=(rows, cols)))

    params = GruParams(
        W=draw(d_in, d_h), U=draw(d_h, d_h),
        W_z=draw(d_in, d_h), U_z=draw(d_h, d_h),
        W_r=draw(d_in, d_h), U_r=draw(d_h, d_h),
        W_h=draw(d_h, c), b_h=parameter(np.zeros(c)),
    )
    return params


def initial_state(d_h: int, batch: Optional[int] = None) -> GruState:
    shape = (d_h,) if batch is None else (batch, d_h)
    return GruState(o=Tensor(np.zeros(shape)))


def _rows(x: Tensor) -> Tensor:
    return reshape(x, (1, x.shape[0])) if x.ndim == 1 else x


def gru_step(h_in: Tensor, state: GruState, p: GruParams) -> GruState:
    """
    Advance the recurrence by one frame

    Args:
        h_in: Frame feature of length d_in, or B×d_in
        state: Previous activation
        p: Parameters

    Returns:
        The new state, with the same batch layout as ``h_in``
    """
    h_in, o = as_tensor(h_in), as_tensor(state.o)
    if h_in.shape[-1] != p.d_in or o.shape[-1] != p.d_h:
        raise ShapeError(f"gru_step: input {h_in.shape} / state {o.shape} do not match d_in={p.d_in}, d_h={p.d_h}")
    if h_in.ndim != o.ndim:
        raise ShapeError(f"gru_step: input {h_in.shape} and state {o.shape} disagree on batching")
    x, prev = _rows(h_in), _rows(o)

    z = sigmoid(add(matmul(x, p.W_z), matmul(prev, p.U_z)))
    r = sigmoid(add(matmul(x, p.W_r), matmul(prev, p.U_r)))
    candidate = tanh(add(matmul(x, p.W), matmul(mul(r, prev), p.U)))
    new = add(mul(sub(1.0, z), prev), mul(z, candidate))
    return GruState(o=new if h_in.ndim == 2 else reshape(new, (p.d_h,)))


def frame_logits(state: GruState, p) -> Tensor:
    """
    Hidden-to-output logits W_h·o + b_h

    Args:
        state: Current state (any cell whose state exposes ``o``)
        p: Parameters holding ``W_h`` and ``b_h``

    Returns:
        C logits, or B×C
    """
    o = as_tensor(state.o)
    logits = matmul(_rows(o), p.W_h)
    logits = add(logits, broadcast_to(p.b_h, logits.shape))
    return logits if o.ndim == 2 else reshape(logits, (logits.shape[1],))


def frame_probabilities(logits: Tensor) -> np.ndarray:
    """Class probabilities from logits (max-subtracted softmax)"""
    return softmax(as_tensor(logits).data)
