"""Toy 2-D datasets and the standard Gaussian prior."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream

KINDS = ("gaussian-ring-8", "two-moons", "checkerboard", "isotropic-gaussian")

RING_RADIUS = 2.0
RING_STD = 0.1


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "gaussian-ring-8"
    dim: int = 2
    seed: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind != "isotropic-gaussian" and self.dim != 2:
            raise ValueError(f"{self.kind} is 2-D only")


@dataclass(frozen=True)
class PriorSpec:
    kind: str = "standard-gaussian"
    dim: int = 2

    def __post_init__(self):
        if self.kind != "standard-gaussian":
            raise ValueError(f"unknown prior kind {self.kind!r}")


def ring_means(n_modes: int = 8, radius: float = RING_RADIUS):
    ang = 2.0 * math.pi * np.arange(n_modes) / n_modes
    return radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def data_sample(spec: DatasetSpec, n: int, rng: RngStream):
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.kind == "gaussian-ring-8":
        idx = rng.integers(8, n)
        return ring_means()[idx] + RING_STD * rng.normal((n, 2))
    if spec.kind == "isotropic-gaussian":
        return spec.scale * rng.normal((n, spec.dim))
    if spec.kind == "two-moons":
        # sklearn-style moons, centred and scaled into [-2, 2]^2
        upper = rng.uniform(n) < 0.5
        th = math.pi * rng.uniform(n)
        x = np.where(upper, np.cos(th), 1.0 - np.cos(th))
        y = np.where(upper, np.sin(th), 0.5 - np.sin(th))
        pts = np.stack([x - 0.5, y - 0.25], axis=1) * 1.6 + 0.05 * rng.normal((n, 2))
        return np.clip(pts, -2.0, 2.0)
    # checkerboard: 4x4 board on [-2, 2]^2, alternate cells occupied
    cx = rng.integers(4, n)
    cy = 2 * rng.integers(2, n) + (cx % 2)
    off = rng.uniform((n, 2))
    return np.stack([cx + off[:, 0], cy + off[:, 1]], axis=1) - 2.0


def prior_sample(prior: PriorSpec, n: int, rng: RngStream):
    return rng.normal((n, prior.dim))


def prior_log_density(prior: PriorSpec, x):
    """-|x|^2 / 2; the normalizing constant is dropped."""
    x = np.asarray(x, dtype=float)
    return -0.5 * np.sum(x * x, axis=-1)


def energy_grad(prior: PriorSpec, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != prior.dim:
        raise ValueError(f"dim mismatch: {x.shape[-1]} vs {prior.dim}")
    return x.copy()
