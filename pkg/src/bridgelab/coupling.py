"""Endpoint couplings (X0, X1) and the three ways of producing them."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import DatasetSpec, PriorSpec, data_sample, prior_sample
from .rng import RngStream
from .schedule import ScheduleParams, kappa_bar
from .sde import em_forward

PROVENANCES = ("learned-forward", "independent", "base-joint", "generator")


@dataclass
class CouplingBatch:
    x0: np.ndarray
    x1: np.ndarray
    provenance: str

    def __post_init__(self):
        if self.x0.shape != self.x1.shape:
            raise ValueError(f"endpoint shapes differ: {self.x0.shape} vs {self.x1.shape}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return len(self.x0)

    def subset(self, idx) -> "CouplingBatch":
        return CouplingBatch(self.x0[idx], self.x1[idx], self.provenance)


def simulate_coupling(params: ScheduleParams, u, x0_batch, forward_nfe: int,
                      rng: RngStream) -> CouplingBatch:
    """Push data through the forward controlled SDE; ``u`` is only evaluated, never differentiated."""
    traj = em_forward(params, u, x0_batch, forward_nfe, rng, keep_path=False)
    return CouplingBatch(np.asarray(x0_batch, dtype=float), traj.end, "learned-forward")


def make_coupling(mode: str, params: ScheduleParams, dataset: DatasetSpec, prior: PriorSpec,
                  n: int, rng: RngStream, u=None, forward_nfe: int = 20) -> CouplingBatch:
    if mode not in PROVENANCES[:3]:
        raise ValueError(f"unknown coupling mode {mode!r}")
    x0 = data_sample(dataset, n, rng.child("data"))
    if mode == "learned-forward":
        if u is None:
            raise ValueError("learned-forward coupling needs a forward control u")
        return simulate_coupling(params, u, x0, forward_nfe, rng.child("forward"))
    if mode == "independent":
        return CouplingBatch(x0, prior_sample(prior, n, rng.child("prior")), "independent")
    kb1 = kappa_bar(params, 1.0)
    x1 = kb1 * x0 + math.sqrt(1.0 - kb1 * kb1) * rng.child("kernel").normal(x0.shape)
    return CouplingBatch(x0, x1, "base-joint")
