"""Minimal SGD and RMSprop updates for parameter vectors."""

from __future__ import annotations

import numpy as np


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def update(self, values: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return values - self.lr * grad


class RmsProp:
    """Squared-gradient moving average; denominator sqrt(avg) + eps."""

    def __init__(self, lr: float, decay: float = 0.99, eps: float = 1e-8):
        self.lr = lr
        self.decay = decay
        self.eps = eps
        self.square_avg = None

    def update(self, values: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.square_avg is None:
            self.square_avg = np.zeros_like(grad)
        self.square_avg = self.decay * self.square_avg + (1.0 - self.decay) * grad * grad
        return values - self.lr * grad / (np.sqrt(self.square_avg) + self.eps)


OPTIMIZERS = {"sgd": Sgd, "rmsprop": RmsProp}


def make_optimizer(name: str, lr: float):
    try:
        return OPTIMIZERS[name](lr)
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}, expected one of {sorted(OPTIMIZERS)}") from None
