"""One-step generator distilled from a trained backward control.

The generator maps (x1, z) to x0. Training alternates ``fake_steps``
bridge-matching updates of a fake control v_xi on the generator's own
coupling with one generator update that pushes v_xi towards the trained
control v_phi.

Two generator gradients are offered. ``"score-difference"`` (default)
moves each bridge point X_t along -(v_xi - v_phi)(X_t) and backpropagates
that through X_t's dependence on x0. ``"literal"`` differentiates
mean |v_xi(t, X_t) - v_phi(t, X_t)|^2 through the fields' inputs. With
v_xi fitted to the generator, the literal gradient mostly rewards
shrinking the generator's spread, so it tends to collapse.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .bridge import bridge_moments, sample_times, tweedie_denoise
from .config import RunConfig
from .coupling import CouplingBatch
from .data import data_sample, prior_sample, ring_means
from .metrics import energy_distance, mode_coverage
from .nets import ControlField, OptimizerState, evaluate, init_field, loss_grad, sq_norm_rows, step
from .rng import RngStream
from .schedule import ScheduleParams
from .stage2 import bm_loss_grad
from .training import check_losses, lr_at


class WarmupFailed(RuntimeError):
    def __init__(self, message, mse=None):
        super().__init__(message)
        self.mse = mse


def generate(gen: ControlField, x1, z):
    """x0 = G(x1, z); the generator has no time input."""
    return evaluate(gen, 0.0, np.concatenate([x1, z], axis=1))


def tweedie_map(params: ScheduleParams, v_phi: ControlField, x1):
    return tweedie_denoise(params, x1, evaluate(v_phi, 1.0, x1))


def new_generator(cfg: RunConfig) -> ControlField:
    d = cfg.dim
    return init_field(cfg.seed * 1000 + 4, cfg.generator_arch.arch(2 * d, d),
                      cfg.generator_arch.time_embed)


def init_generator(cfg: RunConfig, v_phi: ControlField, gen: ControlField = None):
    """Regress a fresh generator onto the Tweedie map of ``v_phi``, ignoring z.

    Stops once the batch MSE drops below ``distill.warmup_tol``; raises
    WarmupFailed if that does not happen within ``warmup_max_steps``.
    Returns (generator, steps taken).
    """
    dc = cfg.distill
    gen = new_generator(cfg) if gen is None else gen
    n = dc.warmup_batch
    opt = OptimizerState("adam", dc.warmup_lr)
    rng = RngStream(cfg.seed, "distill", "warmup")
    d = cfg.dim
    mse = float("inf")
    for i in range(dc.warmup_max_steps):
        it = rng.child(i)
        x1 = prior_sample(cfg.prior, n, it.child("x1"))
        z = it.child("z").normal((n, d))
        target = tweedie_map(cfg.schedule, v_phi, x1)
        inp = np.concatenate([x1, z], axis=1)
        mse2, g = loss_grad(gen, lambda fn: sq_norm_rows(fn(0.0, inp) - target))
        mse = mse2 / d
        if mse < dc.warmup_tol:
            return gen, i
        check_losses("warmup", i, mse=mse)
        gen, opt = step(opt, gen, g, lr_at(dc.warmup_lr, 0.01 * dc.warmup_lr, i,
                                           dc.warmup_max_steps))
    raise WarmupFailed(f"warm-up MSE {mse:.3g} still above {dc.warmup_tol:g} after "
                       f"{dc.warmup_max_steps} steps", mse)


def generator_coupling(prior, gen: ControlField, batch: int, rng: RngStream) -> CouplingBatch:
    x1 = prior_sample(prior, batch, rng.child("x1"))
    z = rng.child("z").normal(x1.shape)
    return CouplingBatch(generate(gen, x1, z), x1, "generator")


def fake_control_step(params: ScheduleParams, v_xi: ControlField, opt: OptimizerState,
                      gen: ControlField, prior, batch: int, rng: RngStream, lr=None):
    """One bridge-matching update of v_xi on the generator's coupling. Returns (loss, v_xi, opt)."""
    coupling = generator_coupling(prior, gen, batch, rng)
    t = sample_times(rng.child("t"), batch)
    noise = rng.child("bridge").normal(coupling.x0.shape)
    loss, g = bm_loss_grad(params, v_xi, coupling, t, noise)
    v_xi, opt = step(opt, v_xi, g, lr)
    return loss, v_xi, opt


def _bridge_point(params, t, x0, x1, noise):
    """X_t with x0 possibly a Var; the other terms are constants."""
    m = bridge_moments(params, t)
    const = m.coeff1[:, None] * x1 + np.sqrt(m.var)[:, None] * noise
    return ad.mul(x0, m.coeff0[:, None]) + const


def generator_loss_grad(params: ScheduleParams, gen: ControlField, v_xi: ControlField,
                        v_phi: ControlField, x1, z, t, noise, mode: str = "score-difference"):
    """Returns (mean |v_xi - v_phi|^2 at the bridge points, generator gradient)."""
    inp = np.concatenate([x1, z], axis=1)
    if mode == "literal":
        def terms(gfn, fx, fp):
            xt = _bridge_point(params, t, gfn(0.0, inp), x1, noise)
            return sq_norm_rows(fx(t, xt, stop=True) - fp(t, xt, stop=True))

        loss, grads = loss_grad([gen, v_xi, v_phi], terms)
        return loss, grads[0]
    if mode != "score-difference":
        raise ValueError(f"unknown generator gradient mode {mode!r}")
    box = {}

    def terms(gfn):
        xt = _bridge_point(params, t, gfn(0.0, inp), x1, noise)
        diff = evaluate(v_xi, t, xt.value) - evaluate(v_phi, t, xt.value)
        box["loss"] = float(np.mean(np.sum(diff * diff, axis=1)))
        # gradient of this surrogate w.r.t. X_t is exactly diff
        return ad.mul(sq_norm_rows(xt - ad.stop_grad(xt.value - diff)), 0.5)

    _, g = loss_grad(gen, terms)
    return box["loss"], g


def generator_step(params, gen, opt, v_xi, v_phi, prior, batch, rng, mode="score-difference",
                   lr=None):
    x1 = prior_sample(prior, batch, rng.child("x1"))
    z = rng.child("z").normal(x1.shape)
    t = sample_times(rng.child("t"), batch)
    noise = rng.child("bridge").normal(x1.shape)
    loss, g = generator_loss_grad(params, gen, v_xi, v_phi, x1, z, t, noise, mode)
    gen, opt = step(opt, gen, g, lr)
    return loss, gen, opt


@dataclass
class DistillResult:
    gen: ControlField
    v_xi: ControlField
    warmup_steps: int
    history: list = field(default_factory=list)  # (iteration, fake_loss, gen_loss)
    evals: list = field(default_factory=list)    # dicts with iteration, energy_distance, mode_coverage


def one_step_samples(cfg: RunConfig, gen: ControlField, n: int, rng: RngStream):
    x1 = prior_sample(cfg.prior, n, rng.child("x1"))
    return generate(gen, x1, rng.child("z").normal(x1.shape))


def evaluate_generator(cfg: RunConfig, gen: ControlField, iteration: int) -> dict:
    n = cfg.distill.eval_samples
    x = one_step_samples(cfg, gen, n, RngStream(cfg.seed, "distill", "eval"))
    data = data_sample(cfg.dataset, n, RngStream(cfg.seed, "distill", "eval-data"))
    out = {"iteration": iteration, "energy_distance": energy_distance(x, data)}
    if cfg.dataset.kind == "gaussian-ring-8":
        out["mode_coverage"] = mode_coverage(x, ring_means(), cfg.eval.mode_radius)
    return out


def distill_train(cfg: RunConfig, v_phi: ControlField, checkpoint=None) -> DistillResult:
    """Tweedie warm-up, then alternate ``fake_steps`` fake-control steps with one generator step."""
    dc = cfg.distill
    params = cfg.schedule
    gen, warm = init_generator(cfg, v_phi)
    v_xi = v_phi.with_params(v_phi.params.copy())
    opt_g = OptimizerState("adam", dc.lr_gen)
    opt_f = OptimizerState("adam", dc.lr_fake)
    rng = RngStream(cfg.seed, "distill")
    result = DistillResult(gen, v_xi, warm)
    if dc.eval_every:
        result.evals.append(evaluate_generator(cfg, gen, 0))
    for i in range(dc.n_iters):
        it = rng.child(i)
        fake = 0.0
        lr_f = lr_at(dc.lr_fake, dc.lr_fake_end, i, dc.n_iters)
        for k in range(dc.fake_steps):
            fake, v_xi, opt_f = fake_control_step(params, v_xi, opt_f, gen, cfg.prior, dc.batch,
                                                  it.child("fake", k), lr_f)
        gl, gen, opt_g = generator_step(params, gen, opt_g, v_xi, v_phi, cfg.prior, dc.batch,
                                        it.child("gen"), dc.grad_mode,
                                        lr_at(dc.lr_gen, dc.lr_gen_end, i, dc.n_iters))
        check_losses("distill", i, fake_loss=fake, gen_loss=gl)
        result.history.append((i, fake, gl))
        if dc.eval_every and (i + 1) % dc.eval_every == 0:
            result.evals.append(evaluate_generator(cfg, gen, i + 1))
        if checkpoint and dc.eval_every and (i + 1) % dc.eval_every == 0:
            checkpoint(i + 1, {"gen": gen})
    result.gen, result.v_xi = gen, v_xi
    return result
