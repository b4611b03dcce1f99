"""Bits shared by the three trainers."""
from __future__ import annotations

import math

DIVERGENCE_LIMIT = 1e6


class TrainingDivergence(RuntimeError):
    def __init__(self, message, iteration=None, losses=None):
        super().__init__(message)
        self.iteration = iteration
        self.losses = losses or {}


def lr_at(lr: float, lr_end, i: int, n: int) -> float:
    """Cosine decay from ``lr`` to ``lr_end`` over ``n`` iterations; constant if lr_end is None."""
    if lr_end is None or n <= 1:
        return lr
    frac = i / (n - 1)
    return lr_end + 0.5 * (lr - lr_end) * (1.0 + math.cos(math.pi * frac))


def check_losses(stage: str, i: int, **losses) -> None:
    for name, value in losses.items():
        if not math.isfinite(value) or value > DIVERGENCE_LIMIT:
            detail = ", ".join(f"{k}={v:.6g}" for k, v in losses.items())
            raise TrainingDivergence(f"{stage} diverged at iteration {i}: {detail}", i, losses)


class Ema:
    """Exponential moving average of a field's parameters; ``decay == 0`` tracks the raw field."""

    def __init__(self, field, decay: float):
        self.decay = decay
        self.params = field.params.copy()

    def update(self, field):
        if self.decay <= 0.0:
            self.params = field.params
        else:
            self.params = self.decay * self.params + (1.0 - self.decay) * field.params

    def field(self, like):
        return like.with_params(self.params.copy())
