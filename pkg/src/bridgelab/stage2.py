"""Backward-control training by bridge matching under a fixed endpoint coupling.

With ``coupling_mode="independent"`` and a near-memoryless schedule this is
ordinary conditional score matching, which is how the score-SDE baseline
is run.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bridge import sample_bridge, sample_times, score_target
from .config import RunConfig
from .coupling import CouplingBatch, make_coupling
from .nets import ControlField, OptimizerState, evaluate, init_field, loss_grad, sq_norm_rows, step
from .rng import RngStream
from .training import Ema, check_losses, lr_at

__all__ = ["bm_loss", "bm_loss_grad", "make_coupling", "stage2_train", "Stage2Result"]


def bm_loss(params, v, coupling: CouplingBatch, t, noise) -> float:
    xt = sample_bridge(params, t, coupling.x0, coupling.x1, noise)
    r = evaluate(v, t, xt) - score_target(params, t, coupling.x0, xt)
    return float(np.mean(np.sum(r * r, axis=1)))


def bm_terms(fn, params, coupling: CouplingBatch, t, noise):
    xt = sample_bridge(params, t, coupling.x0, coupling.x1, noise)
    target = score_target(params, t, coupling.x0, xt)
    return sq_norm_rows(fn(t, xt) - target)


def bm_loss_grad(params, v, coupling: CouplingBatch, t, noise):
    return loss_grad(v, lambda fn: bm_terms(fn, params, coupling, t, noise))


@dataclass
class Stage2Result:
    v: ControlField
    history: list = field(default_factory=list)  # (iteration, bm_loss)


def init_backward_field(cfg: RunConfig, corrector=None) -> ControlField:
    d = cfg.dim
    arch = cfg.backward_arch.arch(d, d)
    v = init_field(cfg.seed * 1000 + 3, arch, cfg.backward_arch.time_embed)
    if cfg.stage2.warm_start_from_corrector and corrector is not None:
        if corrector.arch != v.arch or corrector.time_embed != v.time_embed:
            raise ValueError("warm start needs corrector and backward fields of the same shape")
        v = v.with_params(corrector.params.copy())
    return v


def stage2_train(cfg: RunConfig, u_frozen=None, checkpoint=None, corrector=None,
                 v=None) -> Stage2Result:
    s2 = cfg.stage2
    params = cfg.schedule
    if s2.coupling_mode == "learned-forward" and u_frozen is None:
        raise ValueError("learned-forward coupling needs a trained forward control")
    v = init_backward_field(cfg, corrector) if v is None else v
    opt = OptimizerState("adam", s2.lr)
    ema = Ema(v, s2.ema_decay)
    rng = RngStream(cfg.seed, "stage2")
    cache = None
    if s2.coupling_cache_size > 0:
        cache = make_coupling(s2.coupling_mode, params, cfg.dataset, cfg.prior,
                              s2.coupling_cache_size, rng.child("cache"), u_frozen,
                              cfg.stage1.forward_nfe)
    history = []
    for i in range(s2.n_iters):
        it = rng.child(i)
        if cache is None:
            coupling = make_coupling(s2.coupling_mode, params, cfg.dataset, cfg.prior, s2.batch,
                                     it.child("coupling"), u_frozen, cfg.stage1.forward_nfe)
        else:
            coupling = cache.subset(it.child("pick").integers(len(cache), s2.batch))
        t = sample_times(it.child("t"), s2.batch)
        t[:int(round(s2.terminal_frac * s2.batch))] = 1.0
        noise = it.child("bridge").normal(coupling.x0.shape)
        loss, g = bm_loss_grad(params, v, coupling, t, noise)
        check_losses("stage2", i, bm_loss=loss)
        v, opt = step(opt, v, g, lr_at(s2.lr, s2.lr_end, i, s2.n_iters))
        ema.update(v)
        history.append((i, loss))
        if checkpoint and s2.checkpoint_every and (i + 1) % s2.checkpoint_every == 0:
            checkpoint(i + 1, {"v": ema.field(v)})
    return Stage2Result(ema.field(v), history)
