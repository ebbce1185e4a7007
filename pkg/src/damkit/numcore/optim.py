"""Plain SGD and Adam updates over Param lists."""

from __future__ import annotations

import numpy as np

from .tensor import Param


def sgd_step(params: list[Param], lr: float) -> None:
    for p in params:
        p.data -= lr * p.grad


def adam_step(
    params: list[Param],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update; first and second moments are carried on each Param."""
    for p in params:
        if not hasattr(p, "_adam_m"):
            p._adam_m = np.zeros_like(p.data)
            p._adam_v = np.zeros_like(p.data)
            p._adam_t = 0
        p._adam_t += 1
        p._adam_m = beta1 * p._adam_m + (1.0 - beta1) * p.grad
        p._adam_v = beta2 * p._adam_v + (1.0 - beta2) * p.grad * p.grad
        m_hat = p._adam_m / (1.0 - beta1 ** p._adam_t)
        v_hat = p._adam_v / (1.0 - beta2 ** p._adam_t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
