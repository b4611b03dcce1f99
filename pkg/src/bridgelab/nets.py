"""Time-conditioned MLP fields, their gradients, and optimizers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .rng import RngStream


class NonFiniteLoss(FloatingPointError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Arch:
    in_dim: int
    hidden: tuple
    out_dim: int
    activation: str = "silu"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"empty arch: in_dim={self.in_dim}, out_dim={self.out_dim}")
        if any(w < 1 for w in self.hidden):
            raise ValueError(f"hidden widths must be >= 1: {self.hidden}")
        if self.activation != "silu":
            raise ValueError(f"unsupported activation {self.activation!r}")


def feature_width(arch: Arch, time_embed: Optional[int]) -> int:
    return arch.in_dim + (0 if time_embed is None else 2 * time_embed + 1)


def layer_shapes(arch: Arch, time_embed: Optional[int]):
    widths = [feature_width(arch, time_embed), *arch.hidden, arch.out_dim]
    return list(zip(widths[:-1], widths[1:]))


def param_count(arch: Arch, time_embed: Optional[int]) -> int:
    return sum(a * b + b for a, b in layer_shapes(arch, time_embed))


@dataclass(frozen=True, eq=False)
class ControlField:
    arch: Arch
    time_embed: Optional[int]
    params: np.ndarray

    def __post_init__(self):
        n = param_count(self.arch, self.time_embed)
        if self.params.shape != (n,):
            raise ValueError(f"expected {n} params, got shape {self.params.shape}")

    def with_params(self, params) -> "ControlField":
        return replace(self, params=np.asarray(params, dtype=float))

    def __call__(self, t, x):
        return evaluate(self, t, x)


def init_field(seed: int, arch: Arch, time_embed: Optional[int] = 8) -> ControlField:
    """Fan-in scaled hidden layers; the output layer is zero so the field starts at 0."""
    rng = RngStream(seed, "init_field")
    shapes = layer_shapes(arch, time_embed)
    chunks = []
    for i, (fan_in, fan_out) in enumerate(shapes):
        if i == len(shapes) - 1:
            w = np.zeros(fan_in * fan_out)
        else:
            w = rng.normal(fan_in * fan_out) / math.sqrt(fan_in)
        chunks += [w, np.zeros(fan_out)]
    return ControlField(arch, time_embed, np.concatenate(chunks))


def time_features(t, n: int, k: int):
    t = np.broadcast_to(np.asarray(t, dtype=float), (n,))[:, None]
    if k == 0:
        return t.copy()
    freqs = 2.0 * math.pi * np.arange(1, k + 1)
    return np.concatenate([t, np.sin(freqs * t), np.cos(freqs * t)], axis=1)


def _inputs(f: ControlField, t, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.shape[-1] != f.arch.in_dim:
        raise ValueError(f"input dim {x2.shape[-1]} != arch.in_dim {f.arch.in_dim}")
    if f.time_embed is None:
        return x2, single
    return np.concatenate([x2, time_features(t, x2.shape[0], f.time_embed)], axis=1), single


def evaluate(f: ControlField, t, x):
    """Plain forward pass (no tape). ``t`` is a scalar or one time per row."""
    h, single = _inputs(f, t, x)
    p = f.params
    shapes = layer_shapes(f.arch, f.time_embed)
    off = 0
    for i, (a, b) in enumerate(shapes):
        w = p[off:off + a * b].reshape(a, b)
        off += a * b
        h = h @ w + p[off:off + b]
        off += b
        if i < len(shapes) - 1:
            # exp overflows to inf for very negative h; the quotient is then the correct 0
            with np.errstate(over="ignore"):
                h = h / (1.0 + np.exp(-h))
    return h[0] if single else h


def apply(f: ControlField, pvar: ad.Var, t, x):
    """Taped forward pass; ``x`` may itself be a Var."""
    if isinstance(x, ad.Var):
        if x.shape[-1] != f.arch.in_dim:
            raise ValueError(f"input dim {x.shape[-1]} != arch.in_dim {f.arch.in_dim}")
        h = x if f.time_embed is None else ad.concat(
            [x, time_features(t, x.shape[0], f.time_embed)])
    else:
        h = ad.Var(_inputs(f, t, x)[0])
    shapes = layer_shapes(f.arch, f.time_embed)
    off = 0
    for i, (a, b) in enumerate(shapes):
        w = ad.take(pvar, off, off + a * b, (a, b))
        off += a * b
        h = h @ w + ad.take(pvar, off, off + b, (b,))
        off += b
        if i < len(shapes) - 1:
            h = ad.silu(h)
    return h


Applier = Callable  # (t, x, stop=False) -> Var


def loss_grad(fields, loss_fn):
    """Value and parameter gradient of ``loss_fn``.

    ``loss_fn`` receives one applier per field, ``fn(t, x, stop=False)``;
    ``stop=True`` evaluates the field with its parameters held constant.
    It returns either per-sample losses (averaged here) or a scalar.
    A single field in gives a single gradient out.
    """
    single = isinstance(fields, ControlField)
    fields = [fields] if single else list(fields)
    pvars = [ad.Var(f.params) for f in fields]

    def make(f, pv):
        def fn(t, x, stop=False):
            return apply(f, ad.stop_grad(pv) if stop else pv, t, x)
        return fn

    out = loss_fn(*[make(f, pv) for f, pv in zip(fields, pvars)])
    if out.value.ndim == 1:
        bad = np.flatnonzero(~np.isfinite(out.value))
        if bad.size:
            raise NonFiniteLoss(f"non-finite loss at batch index {int(bad[0])}", int(bad[0]))
        out = ad.mean(out)
    value = float(out.value)
    if not math.isfinite(value):
        raise NonFiniteLoss("non-finite loss")
    grads = ad.backward(out, pvars)
    return (value, grads[0]) if single else (value, grads)


def sq_norm_rows(a) -> ad.Var:
    return ad.sum_last(ad.square(a))


@dataclass
class OptimizerState:
    method: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.method not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.method!r}")


def step(opt: OptimizerState, f: ControlField, grad, lr: Optional[float] = None):
    """One update; returns (new field, new state). ``lr`` overrides opt.lr for this step."""
    lr = opt.lr if lr is None else lr
    grad = np.asarray(grad, dtype=float)
    if grad.shape != f.params.shape:
        raise ValueError(f"grad shape {grad.shape} != params {f.params.shape}")
    if opt.method == "sgd":
        return f.with_params(f.params - lr * grad), replace(opt, step_count=opt.step_count + 1)
    m = np.zeros_like(grad) if opt.m is None else opt.m
    v = np.zeros_like(grad) if opt.v is None else opt.v
    k = opt.step_count + 1
    m = opt.beta1 * m + (1.0 - opt.beta1) * grad
    v = opt.beta2 * v + (1.0 - opt.beta2) * grad * grad
    mhat = m / (1.0 - opt.beta1 ** k)
    vhat = v / (1.0 - opt.beta2 ** k)
    new = f.params - lr * mhat / (np.sqrt(vhat) + opt.eps)
    return f.with_params(new), replace(opt, step_count=k, m=m, v=v)


def to_json(f: ControlField) -> dict:
    return {
        "arch": {"in_dim": f.arch.in_dim, "hidden": list(f.arch.hidden),
                 "out_dim": f.arch.out_dim, "activation": f.arch.activation},
        "time_embed": f.time_embed,
        "params": [float(v) for v in f.params],
    }


def from_json(obj: dict) -> ControlField:
    a = obj["arch"]
    arch = Arch(int(a["in_dim"]), tuple(int(w) for w in a["hidden"]), int(a["out_dim"]),
                a.get("activation", "silu"))
    te = obj["time_embed"]
    return ControlField(arch, None if te is None else int(te),
                        np.asarray(obj["params"], dtype=float))


def save_field(f: ControlField, path) -> None:
    """Write a checkpoint, keeping the previous one under a ``.prev`` suffix."""
    path = Path(path)
    if path.exists():
        path.replace(path.with_name(path.name + ".prev"))
    path.write_text(json.dumps(to_json(f)))


def load_field(path) -> ControlField:
    return from_json(json.loads(Path(path).read_text()))
