"""Run configuration: nested dataclasses with strict JSON round-trip."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import typing
from dataclasses import dataclass, field
from typing import List, Optional

from .data import DatasetSpec, PriorSpec
from .nets import Arch
from .schedule import ScheduleParams

COUPLING_MODES = ("learned-forward", "independent", "base-joint")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ArchSpec:
    hidden: tuple = (128, 128, 128)
    time_embed: Optional[int] = 8

    def arch(self, in_dim: int, out_dim: int) -> Arch:
        return Arch(in_dim, tuple(self.hidden), out_dim)


@dataclass(frozen=True)
class Stage1Config:
    n_iters: int = 2000
    batch: int = 512
    lr: float = 1e-3
    lr_end: Optional[float] = None
    forward_nfe: int = 20
    am_kappa_weight: bool = True
    ema_decay: float = 0.0
    checkpoint_every: int = 0


@dataclass(frozen=True)
class Stage2Config:
    n_iters: int = 2000
    batch: int = 512
    lr: float = 1e-3
    lr_end: Optional[float] = None
    coupling_mode: str = "learned-forward"
    coupling_cache_size: int = 0
    ema_decay: float = 0.0
    warm_start_from_corrector: bool = False
    # share of each batch placed at t = 1, where the terminal control feeds the Tweedie map
    terminal_frac: float = 0.0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.coupling_mode not in COUPLING_MODES:
            raise ConfigError(f"unknown coupling_mode {self.coupling_mode!r}")
        if not 0.0 <= self.terminal_frac < 1.0:
            raise ConfigError("terminal_frac must lie in [0, 1)")


@dataclass(frozen=True)
class DistillConfig:
    n_iters: int = 1000
    batch: int = 512
    lr_gen: float = 1e-4
    lr_fake: float = 1e-3
    lr_gen_end: Optional[float] = None
    lr_fake_end: Optional[float] = None
    fake_steps: int = 5
    grad_mode: str = "score-difference"
    warmup_max_steps: int = 6000
    warmup_tol: float = 1e-3
    warmup_lr: float = 2e-3
    warmup_batch: int = 1024
    eval_every: int = 0
    eval_samples: int = 2000

    def __post_init__(self):
        if self.grad_mode not in ("score-difference", "literal"):
            raise ConfigError(f"unknown grad_mode {self.grad_mode!r}")


@dataclass(frozen=True)
class EvalConfig:
    nfe: tuple = (20, 200)
    n_samples: int = 4000
    n_data: int = 4000
    n_traj: int = 1000
    traj_steps: int = 100
    reps: int = 10
    n_var: int = 100
    mode_radius: float = 0.5
    coupling_nfe: int = 200
    # return the mean of the last backward EM step for generated-sample metrics
    denoise_final: bool = True


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    seed: int = 0
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    prior: PriorSpec = field(default_factory=PriorSpec)
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    forward_arch: ArchSpec = field(default_factory=lambda: ArchSpec((64, 64, 64)))
    corrector_arch: ArchSpec = field(default_factory=lambda: ArchSpec((64, 64, 64)))
    backward_arch: ArchSpec = field(default_factory=ArchSpec)
    generator_arch: ArchSpec = field(default_factory=lambda: ArchSpec((128, 128, 128), None))
    stage1: Stage1Config = field(default_factory=Stage1Config)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    distill: DistillConfig = field(default_factory=DistillConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        d = self.schedule.dim
        if self.dataset.dim != d or self.prior.dim != d:
            raise ConfigError(
                f"dimension mismatch: dataset {self.dataset.dim}, prior {self.prior.dim}, schedule {d}")

    @property
    def dim(self) -> int:
        return self.schedule.dim


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _coerce(tp, value, where):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, where)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object")
        return _from_plain(tp, value, where)
    if tp is tuple or origin in (list, List, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        return tuple(value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    return value


def _from_plain(cls, d: dict, where: str = "config"):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {k: _coerce(hints[k], v, f"{where}.{k}") for k, v in d.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def to_dict(cfg: RunConfig) -> dict:
    return _to_plain(cfg)


def from_dict(d: dict) -> RunConfig:
    return _from_plain(RunConfig, d)


def dumps(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True)


def loads(text: str) -> RunConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from e
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    return from_dict(d)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(json.dumps(to_dict(cfg), sort_keys=True).encode()).hexdigest()[:16]


def apply_env(cfg: RunConfig) -> RunConfig:
    """BRIDGELAB_SEED, when set, replaces the configured seed."""
    raw = os.environ.get("BRIDGELAB_SEED")
    if raw is None or raw == "":
        return cfg
    try:
        return dataclasses.replace(cfg, seed=int(raw))
    except ValueError as e:
        raise ConfigError(f"BRIDGELAB_SEED must be an integer, got {raw!r}") from e
