"""Stochastic gradient descent over tensor parameters."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def sgd_step(params: list[Tensor], lr: float) -> None:
    """Apply p <- p - lr * grad(p) in place, then clear all grads."""
    missing = [i for i, p in enumerate(params) if p.grad is None]
    if missing:
        raise ValueError(f"sgd_step: parameters at positions {missing} have no gradient")
    for p in params:
        p.data -= np.float32(lr) * p.grad
        p.grad = None


class SGD:
    """SGD with optional classical momentum (v <- mu*v + g; p <- p - lr*v).

    With momentum == 0 a step is identical to :func:`sgd_step`.
    """

    def __init__(self, params: list[Tensor], lr: float, momentum: float = 0.0):
        self.params = list(params)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self._velocity = [np.zeros_like(p.data) for p in self.params] if momentum else None

    def step(self) -> None:
        if self.momentum == 0.0:
            sgd_step(self.params, self.lr)
            return
        missing = [i for i, p in enumerate(self.params) if p.grad is None]
        if missing:
            raise ValueError(f"SGD.step: parameters at positions {missing} have no gradient")
        mu = np.float32(self.momentum)
        lr = np.float32(self.lr)
        for p, v in zip(self.params, self._velocity):
            v *= mu
            v += p.grad
            p.data -= lr * v
            p.grad = None
