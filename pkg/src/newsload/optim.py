"""Adam optimizer state and early stopping, shared by both trainable models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(state: AdamState, params: dict, grads: dict) -> dict:
    """One bias-corrected Adam step; returns new parameter arrays.

    ``state`` is advanced in place.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    out = {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {k} {p.shape}")
        m = state.m.get(k)
        if m is None:
            m = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * state.v[k] + (1.0 - b2) * g * g
        state.m[k] = m
        state.v[k] = v
        out[k] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return out


@dataclass
class EarlyStopping:
    """Tracks the best validation loss; ``stop`` turns true after ``patience`` stale epochs."""

    patience: int = 10
    best: float = np.inf
    best_epoch: int = -1
    since_improvement: int = 0

    def update(self, loss, epoch):
        if loss < self.best:
            self.best = loss
            self.best_epoch = epoch
            self.since_improvement = 0
            return True
        self.since_improvement += 1
        return False

    @property
    def stop(self):
        return self.since_improvement >= self.patience
