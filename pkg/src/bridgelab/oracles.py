"""Exact reference computations used to check the learned pipeline.

Discrete static Schrödinger bridges are solved two independent ways:
log-domain Sinkhorn scaling of the base joint, and exponential tilting
of the base joint by a terminal cost (value-function form). The Gaussian
bridge is recomputed by conjugate conditioning of two transition kernels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .bridge import BridgeMoments
from .schedule import ScheduleParams, transition_moments


class SinkhornNotConverged(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass
class DiscreteBridgeProblem:
    x0_support: np.ndarray
    x1_support: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    base_kernel: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        self.base_kernel = np.asarray(self.base_kernel, dtype=float)
        m, n = self.base_kernel.shape
        if self.mu.shape != (m,) or self.nu.shape != (n,):
            raise ValueError("marginal sizes do not match the kernel")
        for name, w in (("mu", self.mu), ("nu", self.nu)):
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a probability vector")
        if np.any(self.base_kernel < 0) or np.max(np.abs(self.base_kernel.sum(1) - 1.0)) > 1e-12:
            raise ValueError("kernel rows must be probability vectors")


def base_joint(problem: DiscreteBridgeProblem):
    return problem.mu[:, None] * problem.base_kernel


def tv(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def marginal_residual(coupling, mu, nu) -> float:
    return max(tv(coupling.sum(1), mu), tv(coupling.sum(0), nu))


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def sinkhorn_static_sb(problem: DiscreteBridgeProblem, max_iters: int = 100_000,
                       tol: float = 1e-10):
    """KL(pi || base joint) minimizer with marginals (mu, nu).

    Returns ``(coupling, scale0, scale1, iterations)`` with
    ``coupling = diag(scale0) @ base_joint @ diag(scale1)``.
    """
    log_j = _log(base_joint(problem))
    log_mu, log_nu = _log(problem.mu), _log(problem.nu)
    f = np.zeros(len(log_mu))
    g = np.zeros(len(log_nu))
    residual = math.inf
    for it in range(1, max_iters + 1):
        row = logsumexp(log_j + g[None, :], axis=1)
        f = np.where(np.isfinite(log_mu), log_mu - row, 0.0)
        col = logsumexp(log_j + f[:, None], axis=0)
        g = np.where(np.isfinite(log_nu), log_nu - col, 0.0)
        coupling = np.exp(log_j + f[:, None] + g[None, :])
        residual = marginal_residual(coupling, problem.mu, problem.nu)
        if residual <= tol:
            return coupling, np.exp(f), np.exp(g), it
    raise SinkhornNotConverged(
        f"Sinkhorn did not reach tol={tol} in {max_iters} iterations "
        f"(residual {residual:.3e})", residual)


def soc_tilted_joint(problem: DiscreteBridgeProblem, g):
    """Optimal joint of the discrete control problem with terminal cost ``g``.

    ``value0[i] = -log sum_j K_ij exp(-g_j)`` and
    ``coupling[i, j] = mu_i K_ij exp(-g_j + value0[i])``; every row keeps mass mu_i.
    """
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("terminal cost must be finite")
    log_k = _log(problem.base_kernel)
    value0 = -logsumexp(log_k - g[None, :], axis=1)
    coupling = np.exp(_log(problem.mu)[:, None] + log_k - g[None, :] + value0[:, None])
    return coupling, value0


def backward_potential(problem: DiscreteBridgeProblem, scale0):
    """Kernel-propagated mass of ``scale0 * mu`` at the terminal support."""
    return problem.base_kernel.T @ (scale0 * problem.mu)


def nonmemoryless_terminal_cost(problem: DiscreteBridgeProblem, scale0):
    """g = log(hat_phi_1 / prior) built from Sinkhorn's row scaling."""
    return np.log(backward_potential(problem, scale0)) - np.log(problem.nu)


def nonmemoryless_terminal_cost_check(problem: DiscreteBridgeProblem, nu=None,
                                      max_iters: int = 100_000, tol: float = 1e-13):
    """TV distance between the Sinkhorn bridge and the tilted joint under the bridge's own cost."""
    if nu is not None:
        problem = DiscreteBridgeProblem(problem.x0_support, problem.x1_support,
                                        problem.mu, nu, problem.base_kernel)
    coupling, scale0, _, _ = sinkhorn_static_sb(problem, max_iters, tol)
    tilted, _ = soc_tilted_joint(problem, nonmemoryless_terminal_cost(problem, scale0))
    return tv(tilted, coupling)


def memoryless_terminal_cost(problem: DiscreteBridgeProblem):
    """g = log(base terminal marginal / prior): exact only for a memoryless kernel."""
    base_x1 = base_joint(problem).sum(0)
    return np.log(base_x1) - np.log(problem.nu)


def gaussian_bridge_conditioning(params: ScheduleParams, t: float) -> BridgeMoments:
    """Posterior of X_t given (X_0, X_1) from p(X_t | X_0) p(X_1 | X_t)."""
    if t <= 0.0:
        return BridgeMoments(1.0, 0.0, 0.0)
    if t >= 1.0:
        return BridgeMoments(0.0, 1.0, 0.0)
    a, v_a = transition_moments(params, 0.0, t, 1.0)
    b, v_b = transition_moments(params, t, 1.0, 1.0)
    a, b = float(a), float(b)
    precision = 1.0 / v_a + b * b / v_b
    var = 1.0 / precision
    return BridgeMoments(var * a / v_a, var * b / v_b, var)


def grid_problem(params: ScheduleParams, grid, mu, nu):
    """1-D discretization of the base transition kernel on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    mean, var = transition_moments(params, 0.0, 1.0, grid)
    logk = -0.5 * (grid[None, :] - mean[:, None]) ** 2 / var
    k = np.exp(logk - logsumexp(logk, axis=1, keepdims=True))
    return DiscreteBridgeProblem(grid, grid, mu, nu, k)


def quadrature(f, s: float, t: float, n: int) -> float:
    """Composite trapezoid rule with ``n`` panels."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.linspace(s, t, n + 1)
    y = np.asarray(f(x), dtype=float) * np.ones_like(x)
    h = (t - s) / n
    return float(h * (y.sum() - 0.5 * (y[0] + y[-1])))


def finite_diff_grad(f, x, h: float = 1e-5):
    """Central differences of scalar ``f`` at ``x``."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.array(x, dtype=float)
    flat = x.ravel()
    out = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * h)
    return out.reshape(x.shape)


def random_problem(m: int, n: int, seed: int, memoryless: bool = False) -> DiscreteBridgeProblem:
    """Strictly positive random instance; ``memoryless`` repeats one kernel row."""
    rng = np.random.default_rng(seed)
    mu = rng.dirichlet(np.ones(m))
    nu = rng.dirichlet(np.ones(n))
    if memoryless:
        k = np.tile(rng.dirichlet(np.ones(n)), (m, 1))
    else:
        k = rng.dirichlet(np.ones(n), size=m)
    return DiscreteBridgeProblem(np.arange(m, dtype=float), np.arange(n, dtype=float), mu, nu, k)
