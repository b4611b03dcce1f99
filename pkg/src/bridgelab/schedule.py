"""Variance-preserving base SDE with a linear noise rate.

Time runs from data (t=0) to prior (t=1) and the rate decreases along it:
``beta(t) = (1 - t) * beta_max + t * beta_min``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleParams:
    beta_max: float = 4.0
    beta_min: float = 0.1
    dim: int = 2

    def __post_init__(self):
        if not (self.beta_max >= self.beta_min > 0):
            raise ScheduleError(
                f"need beta_max >= beta_min > 0, got {self.beta_max}, {self.beta_min}")
        if self.dim < 1:
            raise ScheduleError(f"dim must be >= 1, got {self.dim}")


def _check_t(t):
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0.0) or np.any(ta > 1.0) or np.any(~np.isfinite(ta)):
        raise ScheduleError(f"time outside [0, 1]: {t}")
    return ta


def beta(params: ScheduleParams, t):
    ta = _check_t(t)
    out = (1.0 - ta) * params.beta_max + ta * params.beta_min
    return float(out) if out.ndim == 0 else out


def drift(params: ScheduleParams, t, x):
    b = beta(params, t)
    if np.ndim(b):
        b = np.reshape(b, np.shape(b) + (1,) * (np.ndim(x) - np.ndim(b)))
    return -0.5 * b * np.asarray(x, dtype=float)


def sigma(params: ScheduleParams, t):
    b = beta(params, t)
    return math.sqrt(b) if np.ndim(b) == 0 else np.sqrt(b)


def accumulated_rate(params: ScheduleParams, s, t):
    """Integral of beta over [s, t] in closed form."""
    sa, ta = _check_t(s), _check_t(t)
    if np.any(sa > ta):
        raise ScheduleError(f"need s <= t, got s={s}, t={t}")
    out = (params.beta_max * (ta - sa)
           + 0.5 * (params.beta_min - params.beta_max) * (ta * ta - sa * sa))
    return float(out) if out.ndim == 0 else out


def kappa(params: ScheduleParams, t):
    """exp(-B(t, 1) / 2): contraction from t to the prior end."""
    ta = _check_t(t)
    out = np.exp(-0.5 * np.asarray(accumulated_rate(params, ta, np.ones_like(ta))))
    return float(out) if out.ndim == 0 else out


def kappa_bar(params: ScheduleParams, t):
    """exp(-B(0, t) / 2): contraction from the data end to t."""
    ta = _check_t(t)
    out = np.exp(-0.5 * np.asarray(accumulated_rate(params, np.zeros_like(ta), ta)))
    return float(out) if out.ndim == 0 else out


def transition_moments(params: ScheduleParams, s, t, x_s):
    """Mean and isotropic variance of X_t given X_s = x_s."""
    b = accumulated_rate(params, s, t)
    mean = math.exp(-0.5 * b) * np.asarray(x_s, dtype=float)
    return mean, -math.expm1(-b)
