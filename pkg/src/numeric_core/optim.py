#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Optimizers

Parameters are updated in place so that every model holding a reference to a
parameter tensor sees the new values.
"""

import logging
from typing import Dict

import numpy as np

from src.numeric_core.tensor import Tensor

logger = logging.getLogger(__name__)


class SGD:
    """
    Plain gradient descent
    """

    def __init__(self, params: Dict[str, Tensor], lr: float = 1e-3):
        self.params = params
        self.lr = lr

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.grad = None

    def step(self) -> None:
        for param in self.params.values():
            if param.grad is not None:
                param.data -= self.lr * param.grad


class Adam:
    """
    Adam optimizer with bias-corrected moment estimates
    """

    def __init__(
        self,
        params: Dict[str, Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        """
        Initialize the optimizer

        Args:
            params: Named trainable tensors, updated in iteration order
            lr: Learning rate
            beta1: Decay of the first moment estimate
            beta2: Decay of the second moment estimate
            eps: Denominator offset
        """
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.grad = None

    def step(self) -> None:
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for name, param in self.params.items():
            if param.grad is None:
                continue
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * param.grad
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * param.grad ** 2
            param.data -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
