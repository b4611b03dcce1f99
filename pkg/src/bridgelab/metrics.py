"""Trajectory and distribution diagnostics."""
from __future__ import annotations

import numpy as np

from . import kernels
from .coupling import CouplingBatch
from .rng import RngStream
from .schedule import ScheduleParams
from .sde import Trajectory, em_backward, em_forward


class MetricError(ValueError):
    pass


def straightness(traj: Trajectory):
    """Per-sample sum of squared increments over squared net displacement.

    Equals 1/T for a straight path walked in T equal steps and grows with
    any detour. Raises if some sample has zero net displacement.
    """
    states = np.ascontiguousarray(traj.states, dtype=float)
    if states.ndim != 3 or states.shape[0] < 2:
        raise MetricError("straightness needs a path with at least one step")
    s = kernels.straightness(states)
    bad = np.flatnonzero(np.isnan(s))
    if bad.size:
        raise MetricError(f"zero net displacement for samples {bad[:10].tolist()}")
    return s


def trajectory_variance(params: ScheduleParams, v, x1_batch, reps: int, nfe: int,
                        rng: RngStream, denoise_final: bool = False, noise: bool = True) -> float:
    """Mean distance of ``reps`` backward samples from one x1 to their centroid, averaged over x1."""
    if reps < 2:
        raise MetricError("reps must be >= 2")
    x1 = np.asarray(x1_batch, dtype=float)
    n, d = x1.shape
    tiled = np.broadcast_to(x1, (reps, n, d)).reshape(reps * n, d)
    out = em_backward(params, v, tiled, nfe, rng, noise=noise, keep_path=False,
                      denoise_final=denoise_final).end.reshape(reps, n, d)
    centroid = out.mean(axis=0)
    return float(np.mean(np.linalg.norm(out - centroid, axis=2)))


def inversion_error(params: ScheduleParams, u, v, x0_batch, nfe: int, rng: RngStream,
                    denoise_final: bool = False, noise: bool = True) -> float:
    """Push x0 forward to x1, come back with the backward SDE, report mean |x0_hat - x0|."""
    x0 = np.asarray(x0_batch, dtype=float)
    x1 = em_forward(params, u, x0, nfe, rng.child("forward"), noise=noise, keep_path=False).end
    x0_hat = em_backward(params, v, x1, nfe, rng.child("backward"), noise=noise, keep_path=False,
                         denoise_final=denoise_final).end
    return float(np.mean(np.linalg.norm(x0_hat - x0, axis=1)))


def energy_distance(a, b) -> float:
    """2 E|A-B| - E|A-A'| - E|B-B'|.

    Cross term over all pairs, within-sample terms as U-statistics (i != j),
    so the estimate is unbiased. It can dip below zero by sampling noise,
    most visibly when ``a`` and ``b`` are the same set; the returned value
    is clamped at 0.
    """
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    n, m = len(a), len(b)
    if n < 2 or m < 2:
        raise MetricError("energy distance needs at least two samples on each side")
    if a.shape[1] != b.shape[1]:
        raise MetricError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    ab = kernels.pairwise_distance_sum(a, b) / (n * m)
    aa = kernels.pairwise_distance_sum_self(a) / (n * (n - 1))
    bb = kernels.pairwise_distance_sum_self(b) / (m * (m - 1))
    return max(0.0, 2.0 * ab - aa - bb)


def mode_coverage(samples, modes, radius: float = 0.5, min_frac: float = 0.01) -> int:
    """Number of modes with at least ``min_frac`` of the samples within ``radius``."""
    x = np.asarray(samples, dtype=float)
    modes = np.asarray(modes, dtype=float)
    if len(x) == 0:
        return 0
    d = np.linalg.norm(x[:, None, :] - modes[None, :, :], axis=2)
    frac = np.mean(d <= radius, axis=0)
    return int(np.sum(frac >= min_frac))


def coupling_corr(coupling: CouplingBatch):
    """Pearson correlation between x0 and x1, per dimension."""
    x0 = coupling.x0 - coupling.x0.mean(axis=0)
    x1 = coupling.x1 - coupling.x1.mean(axis=0)
    return np.sum(x0 * x1, axis=0) / np.sqrt(np.sum(x0 * x0, axis=0) * np.sum(x1 * x1, axis=0))
