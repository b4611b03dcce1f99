"""Reciprocal sampler of the VP base process and the regression targets built on it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import ScheduleError, ScheduleParams, kappa, kappa_bar, sigma

# Loss times are drawn from [T_EPS, 1 - T_EPS]; the conditional score blows up at t=0.
T_EPS = 1e-4


@dataclass(frozen=True)
class BridgeMoments:
    coeff0: float
    coeff1: float
    var: float


def bridge_moments(params: ScheduleParams, t) -> BridgeMoments:
    """Moments of X_t given (X_0, X_1) under the base process.

    Accepts scalar or array ``t``; array inputs give array-valued fields.
    """
    kb1 = kappa_bar(params, 1.0)
    denom = 1.0 - kb1 * kb1
    if denom <= 0.0:
        raise ScheduleError("degenerate schedule: kappa_bar(1) == 1")
    k, kb = kappa(params, t), kappa_bar(params, t)
    one_m_k2 = 1.0 - np.square(k)
    one_m_kb2 = 1.0 - np.square(kb)
    coeff0 = kb * one_m_k2 / denom
    coeff1 = k * one_m_kb2 / denom
    var = np.maximum(one_m_k2 * one_m_kb2 / denom, 0.0)
    if np.ndim(t) == 0:
        # pin the endpoints exactly; rounding in kappa would otherwise leave ~1e-17 residue
        if t == 0:
            return BridgeMoments(1.0, 0.0, 0.0)
        if t == 1:
            return BridgeMoments(0.0, 1.0, 0.0)
        return BridgeMoments(float(coeff0), float(coeff1), float(var))
    return BridgeMoments(coeff0, coeff1, var)


def _col(a, like):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1 and np.ndim(like) == 2:
        return a[:, None]
    return a


def sample_bridge(params: ScheduleParams, t, x0, x1, noise):
    """Draw X_t ~ N(coeff0 x0 + coeff1 x1, var I) using the supplied standard normals.

    ``t`` may be a scalar or one time per row of a batch.
    """
    m = bridge_moments(params, t)
    x0 = np.asarray(x0, dtype=float)
    return (_col(m.coeff0, x0) * x0 + _col(m.coeff1, x0) * np.asarray(x1, dtype=float)
            + _col(np.sqrt(m.var), x0) * np.asarray(noise, dtype=float))


def score_target(params: ScheduleParams, t, x0, x_t):
    """sigma_t * grad_x log p_base(x_t | x0), the bridge-matching regression target."""
    if np.any(np.asarray(t) <= 0.0):
        raise ScheduleError("score target undefined at t=0 (zero transition variance)")
    kb = kappa_bar(params, t)
    var = 1.0 - np.square(kb)
    x0 = np.asarray(x0, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    scale = _col(sigma(params, t) / var, x_t)
    return -scale * (x_t - _col(kb, x_t) * x0)


def tweedie_denoise(params: ScheduleParams, x1, v1_value):
    """Posterior-mean estimate of X_0 from X_1 given the terminal backward control value."""
    kb1 = kappa_bar(params, 1.0)
    if kb1 <= 0.0:
        raise ScheduleError("kappa_bar(1) == 0; Tweedie inversion undefined")
    s1 = sigma(params, 1.0)
    return (np.asarray(x1, dtype=float)
            + (1.0 - kb1 * kb1) * np.asarray(v1_value, dtype=float) / s1) / kb1


def sample_times(rng, n: int, eps: float = T_EPS):
    return eps + (1.0 - 2.0 * eps) * rng.uniform(n)
