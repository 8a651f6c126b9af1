"""Parameter update rules: Adam with bias correction, and plain SGD."""

from __future__ import annotations

import numpy as np


class SgdState:
    """params <- params - lr * grads."""

    name = "sgd"

    def __init__(self, params: list[np.ndarray]):
        del params

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        for p, g in zip(params, grads):
            p -= lr * g


class AdamState:
    """First/second-moment update with bias correction (b1=0.9, b2=0.999, eps=1e-8)."""

    name = "adam"

    def __init__(self, params: list[np.ndarray], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def make_optimizer(name: str, params: list[np.ndarray]):
    if name == "adam":
        return AdamState(params)
    if name == "sgd":
        return SgdState(params)
    raise ValueError(f"unknown optimizer {name!r}")


def optimizer_step(state, params: list[np.ndarray], grads: list[np.ndarray], lr: float):
    """Apply one update in place; returns the mutated (params, state)."""
    if len(params) != len(grads):
        raise ValueError("params and grads must have matching lengths")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
    state.step(params, grads, lr)
    return params, state
