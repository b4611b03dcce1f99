"""Forward-control training as a data-to-energy sampling problem.

Each iteration simulates a fresh coupling with the current forward
control, takes one adjoint-matching step on ``u`` and one
corrector-matching step on the terminal corrector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bridge import sample_bridge, sample_times, score_target
from .config import RunConfig
from .coupling import CouplingBatch, simulate_coupling
from .data import PriorSpec, data_sample, energy_grad
from .nets import ControlField, OptimizerState, evaluate, init_field, loss_grad, sq_norm_rows, step
from .rng import RngStream
from .schedule import ScheduleParams, kappa, sigma
from .training import Ema, check_losses, lr_at

__all__ = ["energy_grad", "simulate_coupling", "am_target", "am_loss", "am_loss_grad",
           "cm_target", "cm_loss", "cm_loss_grad", "stage1_train", "Stage1Result"]


def am_target(params: ScheduleParams, corrector, prior: PriorSpec, coupling: CouplingBatch,
              t, kappa_weight: bool = True):
    """Regression target for u(t, X_t); depends on the pair only through X_1.

    kappa_weight=True: -kappa_t sigma_t (grad E + v1 / sigma_1)(X_1).
    kappa_weight=False: -(sigma_t grad E + v1)(X_1), the unweighted form.
    """
    x1 = coupling.x1
    v1 = evaluate(corrector, 1.0, x1)
    t = np.asarray(t, dtype=float)
    if kappa_weight:
        w = (kappa(params, t) * sigma(params, t))[:, None]
        return -w * (energy_grad(prior, x1) + v1 / sigma(params, 1.0))
    return -(sigma(params, t)[:, None] * energy_grad(prior, x1) + v1)


def _am_terms(fn, params, corrector, prior, coupling, t, noise, kappa_weight):
    xt = sample_bridge(params, t, coupling.x0, coupling.x1, noise)
    target = am_target(params, corrector, prior, coupling, t, kappa_weight)
    return sq_norm_rows(fn(t, xt) - target)


def am_loss(params, u, corrector, prior, coupling, t, noise, kappa_weight=True) -> float:
    xt = sample_bridge(params, t, coupling.x0, coupling.x1, noise)
    r = evaluate(u, t, xt) - am_target(params, corrector, prior, coupling, t, kappa_weight)
    return float(np.mean(np.sum(r * r, axis=1)))


def am_loss_grad(params, u, corrector, prior, coupling, t, noise, kappa_weight=True):
    return loss_grad(u, lambda fn: _am_terms(fn, params, corrector, prior, coupling, t,
                                             noise, kappa_weight))


def cm_target(params: ScheduleParams, coupling: CouplingBatch):
    return score_target(params, 1.0, coupling.x0, coupling.x1)


def cm_loss(params, v, coupling) -> float:
    r = evaluate(v, 1.0, coupling.x1) - cm_target(params, coupling)
    return float(np.mean(np.sum(r * r, axis=1)))


def cm_loss_grad(params, v, coupling):
    target = cm_target(params, coupling)
    return loss_grad(v, lambda fn: sq_norm_rows(fn(1.0, coupling.x1) - target))


@dataclass
class Stage1Result:
    u: ControlField
    corrector: ControlField
    history: list = field(default_factory=list)  # (iteration, am_loss, cm_loss)


def init_stage1_fields(cfg: RunConfig):
    d = cfg.dim
    u = init_field(cfg.seed * 1000 + 1, cfg.forward_arch.arch(d, d), cfg.forward_arch.time_embed)
    c = init_field(cfg.seed * 1000 + 2, cfg.corrector_arch.arch(d, d),
                   cfg.corrector_arch.time_embed)
    return u, c


def stage1_train(cfg: RunConfig, checkpoint=None, u=None, corrector=None) -> Stage1Result:
    """Alternate adjoint matching on ``u`` and corrector matching on the terminal corrector.

    ``checkpoint(iteration, {"u": ..., "corrector": ...})`` is called every
    ``stage1.checkpoint_every`` iterations when given.
    """
    s1 = cfg.stage1
    params = cfg.schedule
    u0, c0 = init_stage1_fields(cfg)
    u = u0 if u is None else u
    corrector = c0 if corrector is None else corrector
    opt_u = OptimizerState("adam", s1.lr)
    opt_c = OptimizerState("adam", s1.lr)
    ema_u, ema_c = Ema(u, s1.ema_decay), Ema(corrector, s1.ema_decay)
    rng = RngStream(cfg.seed, "stage1")
    history = []
    for i in range(s1.n_iters):
        it = rng.child(i)
        x0 = data_sample(cfg.dataset, s1.batch, it.child("data"))
        coupling = simulate_coupling(params, u, x0, s1.forward_nfe, it.child("forward"))
        t = sample_times(it.child("t"), s1.batch)
        noise = it.child("bridge").normal(x0.shape)
        lr = lr_at(s1.lr, s1.lr_end, i, s1.n_iters)
        am, gu = am_loss_grad(params, u, corrector, cfg.prior, coupling, t, noise,
                              s1.am_kappa_weight)
        cm, gc = cm_loss_grad(params, corrector, coupling)
        check_losses("stage1", i, am_loss=am, cm_loss=cm)
        u, opt_u = step(opt_u, u, gu, lr)
        corrector, opt_c = step(opt_c, corrector, gc, lr)
        ema_u.update(u)
        ema_c.update(corrector)
        history.append((i, am, cm))
        if checkpoint and s1.checkpoint_every and (i + 1) % s1.checkpoint_every == 0:
            checkpoint(i + 1, {"u": ema_u.field(u), "corrector": ema_c.field(corrector)})
    return Stage1Result(ema_u.field(u), ema_c.field(corrector), history)
