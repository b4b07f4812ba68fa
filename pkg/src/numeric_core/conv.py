#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Two-Dimensional Convolution

Same-padding convolution over channels-last feature maps, in standard and
depthwise form, with an optional leading batch axis.
"""

import logging
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.errors import DomainError, ShapeError
from src.numeric_core.tensor import Tensor, _result, as_tensor

logger = logging.getLogger(__name__)


def same_padding(size: int, kernel: int, stride: int) -> Tuple[int, int, int]:
    """
    Compute the output extent and the zero padding for one spatial axis

    Args:
        size: Input extent
        kernel: Kernel extent
        stride: Stride

    Returns:
        Tuple of (output extent, padding before, padding after)
    """
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    before = total // 2
    return out, before, total - before


def conv2d(input: Tensor, kernel: Tensor, stride: int = 1, depthwise: bool = False) -> Tensor:
    """
    Same-padding 2-D convolution with zero fill

    Args:
        input: Feature map of shape h×w×c or B×h×w×c
        kernel: kh×kw×c×c_out, or kh×kw×c×m when depthwise (producing c·m channels)
        stride: 1 or 2
        depthwise: Convolve each input channel separately

    Returns:
        Feature map of spatial extent ceil(h/stride)×ceil(w/stride)
    """
    input, kernel = as_tensor(input), as_tensor(kernel)
    if input.ndim not in (3, 4):
        raise ShapeError(f"conv2d input must be h×w×c or B×h×w×c, got {input.shape}")
    if kernel.ndim != 4:
        raise ShapeError(f"conv2d kernel must have rank 4, got {kernel.shape}")
    kh, kw, kc, kout = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d kernel extents must be odd, got {kh}×{kw}")
    if stride not in (1, 2):
        raise DomainError(f"conv2d stride must be 1 or 2, got {stride}")

    batched = input.ndim == 4
    x = input.data if batched else input.data[np.newaxis]
    batch, h, w, c = x.shape
    if kc != c:
        raise ShapeError(f"conv2d channel mismatch: input has {c} channels, kernel expects {kc}")

    oh, top, bottom = same_padding(h, kh, stride)
    ow, left, right = same_padding(w, kw, stride)
    padded = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))
    # (B, oh, ow, c, kh, kw)
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))[:, ::stride, ::stride][:, :oh, :ow]
    k = kernel.data

    if depthwise:
        out = np.einsum("bijckl,klcm->bijcm", windows, k).reshape(batch, oh, ow, c * kout)
    else:
        cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(batch * oh * ow, kh * kw * c)
        flat_kernel = k.reshape(kh * kw * c, kout)
        out = (cols @ flat_kernel).reshape(batch, oh, ow, kout)

    def scatter(dwindows: np.ndarray) -> np.ndarray:
        # dwindows: (B, oh, ow, kh, kw, c)
        dpadded = np.zeros(padded.shape)
        for i in range(kh):
            for j in range(kw):
                dpadded[:, i:i + stride * oh:stride, j:j + stride * ow:stride, :] += dwindows[:, :, :, i, j, :]
        dx = dpadded[:, top:top + h, left:left + w, :]
        return dx if batched else dx[0]

    def grad_fn(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        g = g if batched else g[np.newaxis]
        if depthwise:
            gk = g.reshape(batch, oh, ow, c, kout)
            dkernel = np.einsum("bijckl,bijcm->klcm", windows, gk)
            dwindows = np.einsum("bijcm,klcm->bijklc", gk, k)
        else:
            g2 = g.reshape(-1, kout)
            dkernel = (cols.T @ g2).reshape(k.shape)
            dwindows = (g2 @ flat_kernel.T).reshape(batch, oh, ow, kh, kw, c)
        return scatter(dwindows), dkernel

    return _result(out if batched else out[0], (input, kernel), grad_fn, "conv2d")
