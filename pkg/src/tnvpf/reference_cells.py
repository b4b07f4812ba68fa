#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Reference recurrent cells (vanilla RNN and LSTM) sharing the GRU's output head
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
    tanh,
)
from src.synthdata.labels import GROUP_CLASSES

logger = logging.getLogger(__name__)


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    limit = np.sqrt(6.0 / (rows + cols))
    return parameter(rng.uniform(-limit, limit, size=(rows, cols)))


def _rows(x: Tensor) -> Tensor:
    return reshape(x, (1, x.shape[0])) if x.ndim == 1 else x


def _affine(x: Tensor, prev: Tensor, W: Tensor, U: Tensor, b: Tensor) -> Tensor:
    out = add(matmul(x, W), matmul(prev, U))
    return add(out, broadcast_to(b, out.shape))


@dataclass
class RnnParams:
    W: Tensor
    U: Tensor
    b: Tensor
    W_h: Tensor
    b_h: Tensor

    @property
    def d_in(self) -> int:
        return self.W.shape[0]

    @property
    def d_h(self) -> int:
        return self.U.shape[0]

    def named(self) -> "OrderedDict[str, Tensor]":
        return OrderedDict((f.name, getattr(self, f.name)) for f in fields(self))

    @classmethod
    def from_named(cls, params: Dict[str, Tensor]) -> "RnnParams":
        return cls(**{f.name: params[f.name] for f in fields(cls)})


@dataclass
class RnnState:
    o: Tensor


def init_rnn_params(d_in: int, d_h: int, seed: int = 0) -> RnnParams:
    rng = np.random.default_rng(seed)
    return RnnParams(
        W=_glorot(rng, d_in, d_h), U=_glorot(rng, d_h, d_h), b=parameter(np.zeros(d_h)),
        W_h=_glorot(rng, d_h, len(GROUP_CLASSES)), b_h=parameter(np.zeros(len(GROUP_CLASSES))),
    )


def rnn_step(h_in: Tensor, state: RnnState, p: RnnParams) -> RnnState:
    """o_t = tanh(W H^t + U o_{t−1} + b)"""
    h_in, o = as_tensor(h_in), as_tensor(state.o)
    if h_in.shape[-1] != p.d_in or o.shape[-1] != p.d_h:
        raise ShapeError(f"rnn_step: input {h_in.shape} / state {o.shape} do not match the parameters")
    new = tanh(_affine(_rows(h_in), _rows(o), p.W, p.U, p.b))
    return RnnState(o=new if h_in.ndim == 2 else reshape(new, (p.d_h,)))


@dataclass
class LstmParams:
    """
    Gate weights stacked along the output axis in the order input, forget,
    cell, output
    """

    W: Tensor
    U: Tensor
    b: Tensor
    W_h: Tensor
    b_h: Tensor

    @property
    def d_in(self) -> int:
        return self.W.shape[0]

    @property
    def d_h(self) -> int:
        return self.U.shape[0]

    def named(self) -> "OrderedDict[str, Tensor]":
        return OrderedDict((f.name, getattr(self, f.name)) for f in fields(self))

    @classmethod
    def from_named(cls, params: Dict[str, Tensor]) -> "LstmParams":
        return cls(**{f.name: params[f.name] for f in fields(cls)})


@dataclass
class LstmState:
    o: Tensor
    c: Tensor


def init_lstm_params(d_in: int, d_h: int, seed: int = 0) -> LstmParams:
    rng = np.random.default_rng(seed)
    bias = np.zeros(4 * d_h)
    bias[d_h:2 * d_h] = 1.0  # forget gate
    return LstmParams(
        W=_glorot(rng, d_in, 4 * d_h), U=_glorot(rng, d_h, 4 * d_h), b=parameter(bias),
        W_h=_glorot(rng, d_h, len(GROUP_CLASSES)), b_h=parameter(np.zeros(len(GROUP_CLASSES))),
    )


def _gate(pre: Tensor, index: int, d_h: int) -> Tensor:
    # Columns [index·d_h, (index+1)·d_h) via a constant selector
    selector = np.zeros((4 * d_h, d_h))
    selector[index * d_h:(index + 1) * d_h, :] = np.eye(d_h)
    return matmul(pre, Tensor(selector))


def lstm_step(h_in: Tensor, state: LstmState, p: LstmParams) -> LstmState:
    h_in, o, c = as_tensor(h_in), as_tensor(state.o), as_tensor(state.c)
    if h_in.shape[-1] != p.d_in or o.shape[-1] != p.d_h:
        raise ShapeError(f"lstm_step: input {h_in.shape} / state {o.shape} do not match the parameters")
    pre = _affine(_rows(h_in), _rows(o), p.W, p.U, p.b)
    i = sigmoid(_gate(pre, 0, p.d_h))
    f = sigmoid(_gate(pre, 1, p.d_h))
    g = tanh(_gate(pre, 2, p.d_h))
    out = sigmoid(_gate(pre, 3, p.d_h))
    cell = add(mul(f, _rows(c)), mul(i, g))
    hidden = mul(out, tanh(cell))
    if h_in.ndim == 1:
        return LstmState(o=reshape(hidden, (p.d_h,)), c=reshape(cell, (p.d_h,)))
    return LstmState(o=hidden, c=cell)


def initial_cell_state(kind: str, d_h: int, batch: Optional[int] = None):
    shape = (d_h,) if batch is None else (batch, d_h)
    if kind == "lstm":
        return LstmState(o=Tensor(np.zeros(shape)), c=Tensor(np.zeros(shape)))
    return RnnState(o=Tensor(np.zeros(shape)))
