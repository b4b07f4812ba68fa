#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Finite-Difference Oracles

Central-difference checks of analytic gradients and Jacobians.
"""

import logging
from typing import Callable

import numpy as np

from src.errors import DomainError, ShapeError
from src.numeric_core.tensor import Tensor, backward

logger = logging.getLogger(__name__)


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-6) -> float:
    """
    Compare the analytic gradient of a scalar function with central differences

    Args:
        f: Scalar-valued function of one tensor
        x: Point at which to check; its values are not modified
        eps: Finite-difference step in [1e-7, 1e-3]

    Returns:
        Max over coordinates of |analytic - numeric| / max(1, |analytic|)
    """
    if not 1e-7 <= eps <= 1e-3:
        raise DomainError(f"grad_check step must lie in [1e-7, 1e-3], got {eps}")

    base = np.array(x.data, dtype=np.float64)
    leaf = Tensor(base.copy(), requires_grad=True)
    out = f(leaf)
    if out.size != 1:
        raise ShapeError(f"grad_check needs a scalar function, got shape {out.shape}")
    if out.requires_grad:
        backward(out)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base)

    numeric = np.empty_like(base)
    for idx in np.ndindex(base.shape):
        plus = base.copy()
        plus[idx] += eps
        minus = base.copy()
        minus[idx] -= eps
        numeric[idx] = (f(Tensor(plus)).item() - f(Tensor(minus)).item()) / (2.0 * eps)

    error = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    worst = float(np.max(error))
    logger.debug("grad_check over %d coordinates: max relative error %.3e", base.size, worst)
    return worst


def numeric_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """
    Build the Jacobian of ``f`` at ``x`` column by column

    Args:
        f: Function from an array to an array
        x: Point of evaluation
        eps: Finite-difference step

    Returns:
        Matrix of shape (f(x).size, x.size)
    """
    x = np.array(x, dtype=np.float64)
    columns = []
    for idx in np.ndindex(x.shape):
        plus = x.copy()
        plus[idx] += eps
        minus = x.copy()
        minus[idx] -= eps
        columns.append((np.ravel(f(plus)) - np.ravel(f(minus))) / (2.0 * eps))
    return np.stack(columns, axis=1)
