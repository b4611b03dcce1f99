"""Euler-Maruyama for the controlled forward/backward SDEs and Heun for the probability-flow ODE."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream
from .schedule import ScheduleParams, beta


class SolverDivergence(FloatingPointError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass
class Trajectory:
    """Path on an ascending time grid; ``states[k]`` is the state at ``times[k]``.

    Backward runs are stored in the same ascending order, with
    ``direction == "backward"`` recording that integration ran from t=1.
    """
    times: np.ndarray
    states: np.ndarray
    direction: str = "forward"

    @property
    def start(self):
        return self.states[0] if self.direction == "forward" else self.states[-1]

    @property
    def end(self):
        return self.states[-1] if self.direction == "forward" else self.states[0]


def _control(c, t, x):
    if c is None:
        return 0.0
    return c(t, x)


def _check(x, k):
    if not np.all(np.isfinite(x)):
        raise SolverDivergence(f"non-finite state after step {k}", k)


def em_forward(params: ScheduleParams, u, x0, nfe: int, rng: RngStream,
               noise: bool = True, keep_path: bool = True) -> Trajectory:
    """dX = [f + sigma u] dt + sigma dW from t=0 to 1 on a uniform grid of ``nfe`` steps."""
    if nfe < 1:
        raise ValueError("nfe must be >= 1")
    x = np.array(x0, dtype=float)
    dt = 1.0 / nfe
    sq = math.sqrt(dt)
    times = np.linspace(0.0, 1.0, nfe + 1)
    path = [x] if keep_path else None
    for k in range(nfe):
        t = float(times[k])
        b = beta(params, t)
        s = math.sqrt(b)
        drift = -0.5 * b * x + s * _control(u, t, x)
        x = x + drift * dt
        if noise:
            x = x + (s * sq) * rng.normal(x.shape)
        _check(x, k)
        if keep_path:
            path.append(x)
    if keep_path:
        return Trajectory(times, np.stack(path), "forward")
    return Trajectory(np.array([0.0, 1.0]), np.stack([np.asarray(x0, dtype=float), x]), "forward")


def em_backward(params: ScheduleParams, v, x1, nfe: int, rng: RngStream,
                noise: bool = True, keep_path: bool = True,
                denoise_final: bool = False) -> Trajectory:
    """dX = [f - sigma v] dt + sigma dW from t=1 down to 0.

    Coefficients are taken at the current (later) time of each step.
    ``denoise_final`` drops the noise of the last step, returning its mean.
    """
    if nfe < 1:
        raise ValueError("nfe must be >= 1")
    x = np.array(x1, dtype=float)
    dt = 1.0 / nfe
    sq = math.sqrt(dt)
    times = np.linspace(0.0, 1.0, nfe + 1)
    path = [x] if keep_path else None
    for k in range(nfe):
        t = float(times[nfe - k])
        b = beta(params, t)
        s = math.sqrt(b)
        drift = -0.5 * b * x - s * _control(v, t, x)
        x = x - drift * dt
        if noise and not (denoise_final and k == nfe - 1):
            x = x + (s * sq) * rng.normal(x.shape)
        _check(x, k)
        if keep_path:
            path.append(x)
    if keep_path:
        return Trajectory(times, np.stack(path[::-1]), "backward")
    return Trajectory(np.array([0.0, 1.0]), np.stack([x, np.asarray(x1, dtype=float)]), "backward")


def pf_drift(params: ScheduleParams, u, v, t, x):
    b = beta(params, t)
    return -0.5 * b * x + 0.5 * math.sqrt(b) * (_control(u, t, x) - _control(v, t, x))


def pf_ode_heun(params: ScheduleParams, u, v, x1, nfe: int, keep_path: bool = True) -> Trajectory:
    """Probability-flow ODE dX = [f + sigma (u - v) / 2] dt, integrated from 1 to 0 with Heun."""
    if nfe < 1:
        raise ValueError("nfe must be >= 1")
    x = np.array(x1, dtype=float)
    h = -1.0 / nfe
    times = np.linspace(0.0, 1.0, nfe + 1)
    path = [x] if keep_path else None
    for k in range(nfe):
        t0, t1 = float(times[nfe - k]), float(times[nfe - k - 1])
        d0 = pf_drift(params, u, v, t0, x)
        pred = x + h * d0
        x = x + 0.5 * h * (d0 + pf_drift(params, u, v, t1, pred))
        _check(x, k)
        if keep_path:
            path.append(x)
    if keep_path:
        return Trajectory(times, np.stack(path[::-1]), "backward")
    return Trajectory(np.array([0.0, 1.0]), np.stack([x, np.asarray(x1, dtype=float)]), "backward")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n_t, n_s, dim = traj.states.shape
    header = "t,sample," + ",".join(f"x{j}" for j in range(dim))
    rows = np.empty((n_t * n_s, dim + 2))
    rows[:, 0] = np.repeat(traj.times, n_s)
    rows[:, 1] = np.tile(np.arange(n_s), n_t)
    rows[:, 2:] = traj.states.reshape(n_t * n_s, dim)
    fmt = ["%.17g", "%d"] + ["%.17g"] * dim
    np.savetxt(path, rows, fmt=fmt, delimiter=",", header=header, comments="")


def read_trajectory_csv(path, direction: str = "forward") -> Trajectory:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n_s = int(rows[:, 1].max()) + 1
    times = rows[::n_s, 0]
    states = rows[:, 2:].reshape(len(times), n_s, -1)
    return Trajectory(times, states, direction)
