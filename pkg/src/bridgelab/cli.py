"""Command-line entry point.

Every subcommand works against a run directory ``<runs-root>/<name>/``::

    config.json            frozen copy of the run configuration
    u.ckpt.json ...        checkpoints (previous version kept as *.prev)
    losses_*.csv           per-iteration training losses
    metrics.json           {"metrics": {...}, "config_hash": ..., "seed": ...}
    samples/*.csv          generated samples
    trajectories/*.csv     backward paths used for the trajectory metrics
    plots/*.svg            scatter, energy distance vs NFE, straightness histogram

Exit codes: 0 success, 2 configuration or missing-input error, 3 numerical
divergence. Failures print one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .coupling import make_coupling
from .data import KINDS, DatasetSpec, data_sample, prior_sample, ring_means
from .distill import WarmupFailed, distill_train, evaluate_generator, one_step_samples
from .metrics import (coupling_corr, energy_distance, inversion_error, mode_coverage,
                      straightness, trajectory_variance)
from .nets import NonFiniteLoss, load_field, save_field
from .oracles import (SinkhornNotConverged, base_joint, marginal_residual, random_problem,
                      sinkhorn_static_sb, soc_tilted_joint, nonmemoryless_terminal_cost, tv)
from .plots import histogram_svg, line_svg, scatter_svg
from .rng import RngStream
from .sde import SolverDivergence, em_backward, pf_ode_heun, read_trajectory_csv, write_trajectory_csv
from .stage1 import stage1_train
from .stage2 import stage2_train
from .training import TrainingDivergence

N_SAVED_TRAJ = 64


class InputError(Exception):
    """Missing checkpoint or other required input; maps to exit code 2."""


# ---------------------------------------------------------------- run dirs

def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def open_run(args) -> tuple:
    """Resolve (config, run_dir) from --config or --run."""
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"config file not found: {path}")
        cfg = cfgmod.loads(path.read_text())
        run_dir = Path(args.runs_root) / cfg.name
    elif getattr(args, "run", None):
        run_dir = Path(args.run)
        path = run_dir / "config.json"
        if not path.exists():
            raise InputError(f"no config.json in run directory {run_dir}")
        cfg = cfgmod.loads(path.read_text())
    else:
        raise ConfigError("give --config or --run")
    cfg = cfgmod.apply_env(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    stored = run_dir / "config.json"
    text = cfgmod.dumps(cfg) + "\n"
    if stored.exists():
        if cfgmod.loads(stored.read_text()) != cfg:
            raise ConfigError(f"{stored} holds a different configuration; use a new run name")
    else:
        stored.write_text(text)
    return cfg, run_dir


def _ckpt(run_dir: Path, name: str):
    path = run_dir / f"{name}.ckpt.json"
    if not path.exists():
        raise InputError(f"missing checkpoint {path}")
    return load_field(path)


def _saver(run_dir: Path):
    def save(_iteration, fields):
        for name, f in fields.items():
            save_field(f, run_dir / f"{name}.ckpt.json")
    return save


def _write_losses(path: Path, header: str, rows) -> None:
    rows = np.asarray(rows, dtype=float)
    fmt = ["%d"] + ["%.17g"] * (rows.shape[1] - 1)
    np.savetxt(path, rows, fmt=fmt, delimiter=",", header=header, comments="")


def _forward_control(cfg: RunConfig, run_dir: Path):
    if cfg.stage2.coupling_mode == "learned-forward":
        return _ckpt(run_dir, "u")
    return None


# ---------------------------------------------------------------- subcommands

def cmd_train_stage1(args) -> dict:
    cfg, run_dir = open_run(args)
    res = stage1_train(cfg, checkpoint=_saver(run_dir))
    save_field(res.u, run_dir / "u.ckpt.json")
    save_field(res.corrector, run_dir / "corrector.ckpt.json")
    _write_losses(run_dir / "losses_stage1.csv", "iteration,am_loss,cm_loss", res.history)
    last = res.history[-1] if res.history else (None, None, None)
    return {"stage": 1, "run": str(run_dir), "am_loss": last[1], "cm_loss": last[2]}


def cmd_train_stage2(args) -> dict:
    cfg, run_dir = open_run(args)
    u = _forward_control(cfg, run_dir)
    corrector = _ckpt(run_dir, "corrector") if cfg.stage2.warm_start_from_corrector else None
    res = stage2_train(cfg, u_frozen=u, checkpoint=_saver(run_dir), corrector=corrector)
    save_field(res.v, run_dir / "v.ckpt.json")
    _write_losses(run_dir / "losses_stage2.csv", "iteration,bm_loss", res.history)
    return {"stage": 2, "run": str(run_dir), "bm_loss": res.history[-1][1] if res.history else None}


def cmd_distill(args) -> dict:
    cfg, run_dir = open_run(args)
    v = _ckpt(run_dir, "v")
    res = distill_train(cfg, v, checkpoint=_saver(run_dir))
    save_field(res.gen, run_dir / "gen.ckpt.json")
    _write_losses(run_dir / "losses_distill.csv", "iteration,fake_loss,gen_loss", res.history)
    final = evaluate_generator(cfg, res.gen, cfg.distill.n_iters)
    out = {"warmup_steps": res.warmup_steps, "evals": res.evals, "final": final,
           "config_hash": cfgmod.config_hash(cfg), "seed": cfg.seed}
    (run_dir / "distill_metrics.json").write_text(_dump_json(out))
    return {"stage": "distill", "run": str(run_dir), **final}


def _samples(cfg, run_dir, solver: str, nfe: int, n: int, rng: RngStream):
    v = _ckpt(run_dir, "v")
    x1 = prior_sample(cfg.prior, n, rng.child("x1"))
    if solver == "heun":
        u = _forward_control(cfg, run_dir)
        return pf_ode_heun(cfg.schedule, u, v, x1, nfe, keep_path=False).end
    if solver == "em":
        return em_backward(cfg.schedule, v, x1, nfe, rng.child("em"), keep_path=False,
                           denoise_final=cfg.eval.denoise_final).end
    if solver == "one-step":
        return one_step_samples(cfg, _ckpt(run_dir, "gen"), n, rng)
    raise ConfigError(f"unknown solver {solver!r}")


def _write_samples(path: Path, x) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join(f"x{j}" for j in range(x.shape[1]))
    np.savetxt(path, x, fmt="%.17g", delimiter=",", header=header, comments="")


def cmd_sample(args) -> dict:
    cfg, run_dir = open_run(args)
    seed = cfg.seed if args.seed is None else args.seed
    n = args.n or cfg.eval.n_samples
    x = _samples(cfg, run_dir, args.solver, args.nfe, n, RngStream(seed, "sample"))
    path = run_dir / "samples" / f"{args.solver}_nfe{args.nfe}_seed{seed}.csv"
    _write_samples(path, x)
    return {"path": str(path), "n": n, "mean": x.mean(0).tolist(), "var": x.var(0).tolist()}


def evaluate_run(cfg: RunConfig, run_dir: Path, nfes) -> dict:
    ev = cfg.eval
    v = _ckpt(run_dir, "v")
    u = _forward_control(cfg, run_dir)
    p = cfg.schedule
    root = RngStream(cfg.seed, "eval")
    data = data_sample(cfg.dataset, ev.n_data, root.child("data"))
    ring = cfg.dataset.kind == "gaussian-ring-8"
    m = {}
    for nfe in nfes:
        x = _samples(cfg, run_dir, "em", nfe, ev.n_samples, root.child("samples", nfe))
        _write_samples(run_dir / "samples" / f"eval_em_nfe{nfe}.csv", x)
        m[f"energy_distance_nfe{nfe}"] = energy_distance(x, data)
        if ring:
            m[f"mode_coverage_nfe{nfe}"] = mode_coverage(x, ring_means(), ev.mode_radius)
    m["energy_distance"] = m[f"energy_distance_nfe{nfes[0]}"]

    if u is not None:
        c = make_coupling("learned-forward", p, cfg.dataset, cfg.prior, ev.n_samples,
                          root.child("coupling"), u, ev.coupling_nfe)
        m["coupling_corr"] = coupling_corr(c).tolist()

    # trajectory diagnostics use the raw backward SDE
    x1 = prior_sample(cfg.prior, ev.n_traj, root.child("traj-x1"))
    traj = em_backward(p, v, x1, ev.traj_steps, root.child("traj"))
    s = straightness(traj)
    m["straightness_mean"] = float(np.mean(s))
    m["straightness_median"] = float(np.median(s))
    m["trajectory_variance"] = trajectory_variance(p, v, x1[:ev.n_var], ev.reps, ev.traj_steps,
                                                   root.child("tv"))
    x0 = data_sample(cfg.dataset, ev.n_traj, root.child("inv-x0"))
    m["inversion_error"] = inversion_error(p, u, v, x0, ev.traj_steps, root.child("inv"))
    tdir = run_dir / "trajectories"
    tdir.mkdir(exist_ok=True)
    keep = type(traj)(traj.times, traj.states[:, :N_SAVED_TRAJ], traj.direction)
    write_trajectory_csv(keep, tdir / f"backward_em_T{ev.traj_steps}.csv")

    if (run_dir / "gen.ckpt.json").exists():
        g = evaluate_generator(cfg, _ckpt(run_dir, "gen"), cfg.distill.n_iters)
        m["generator_energy_distance"] = g["energy_distance"]
        if "mode_coverage" in g:
            m["generator_mode_coverage"] = g["mode_coverage"]
    return {"metrics": m, "config_hash": cfgmod.config_hash(cfg), "seed": cfg.seed}


def emit_plots(run_dir: Path) -> list:
    """Write the SVG figures for a run directory; returns the paths written."""
    run_dir = Path(run_dir)
    mpath = run_dir / "metrics.json"
    if not mpath.exists():
        raise InputError(f"cannot plot: {mpath} missing")
    metrics = json.loads(mpath.read_text())["metrics"]
    pdir = run_dir / "plots"
    pdir.mkdir(exist_ok=True)
    written = []
    nfes = sorted(int(k.rsplit("nfe", 1)[1]) for k in metrics if k.startswith("energy_distance_nfe"))
    if nfes:
        svg = line_svg(nfes, {"backward EM": [metrics[f"energy_distance_nfe{k}"] for k in nfes]},
                       "energy distance vs NFE", "NFE", "energy distance", log_x=len(nfes) > 1)
        written.append(pdir / "energy_distance_vs_nfe.svg")
        written[-1].write_text(svg)
        spath = run_dir / "samples" / f"eval_em_nfe{nfes[0]}.csv"
        if spath.exists():
            x = np.loadtxt(spath, delimiter=",", skiprows=1, ndmin=2)
            cfg = cfgmod.loads((run_dir / "config.json").read_text())
            data = data_sample(cfg.dataset, len(x), RngStream(cfg.seed, "eval", "data"))
            if x.shape[1] >= 2:
                written.append(pdir / "samples_scatter.svg")
                written[-1].write_text(scatter_svg({"data": data, f"EM, NFE {nfes[0]}": x},
                                                   "generated vs data"))
    tdir = run_dir / "trajectories"
    for path in sorted(tdir.glob("*.csv")) if tdir.exists() else []:
        s = straightness(read_trajectory_csv(path, "backward"))
        written.append(pdir / f"straightness_{path.stem}.svg")
        written[-1].write_text(histogram_svg(s, 30, "path straightness", "S"))
    return [str(w) for w in written]


def cmd_eval(args) -> dict:
    cfg, run_dir = open_run(args)
    nfes = tuple(args.nfe) if args.nfe else tuple(cfg.eval.nfe)
    if not nfes or min(nfes) < 1:
        raise ConfigError("nfe values must be >= 1")
    out = evaluate_run(cfg, run_dir, nfes)
    (run_dir / "metrics.json").write_text(_dump_json(out))
    plots = emit_plots(run_dir)
    return {"run": str(run_dir), "metrics": out["metrics"], "plots": plots}


def cmd_oracle(args) -> dict:
    prob = random_problem(args.m, args.n, args.seed, args.memoryless)
    coupling, scale0, _, iters = sinkhorn_static_sb(prob, args.max_iters, args.tol)
    tilted, value0 = soc_tilted_joint(prob, nonmemoryless_terminal_cost(prob, scale0))
    product = np.outer(prob.mu, prob.nu)
    return {
        "m": args.m, "n": args.n, "seed": args.seed, "memoryless": args.memoryless,
        "sinkhorn_iterations": iters,
        "marginal_residual": marginal_residual(coupling, prob.mu, prob.nu),
        "tv_tilted_vs_sinkhorn": tv(tilted, coupling),
        "tv_coupling_vs_product": tv(coupling, product),
        "tv_base_vs_product": tv(base_joint(prob), product),
        "value0": value0.tolist(),
        "coupling": coupling.tolist(),
    }


def cmd_data_dump(args) -> None:
    spec = DatasetSpec(args.dataset, args.dim, args.seed, args.scale)
    x = data_sample(spec, args.n, RngStream(args.seed, "data-dump"))
    header = ",".join(f"x{j}" for j in range(x.shape[1]))
    if args.out:
        _write_samples(Path(args.out), x)
    else:
        np.savetxt(sys.stdout, x, fmt="%.17g", delimiter=",", header=header, comments="")
    return None


# ---------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bridgelab", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def run_args(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--config", help="run configuration JSON")
        g.add_argument("--run", help="existing run directory")
        p.add_argument("--runs-root", default="runs", help="parent of run directories (with --config)")

    for name, fn in (("train-stage1", cmd_train_stage1), ("train-stage2", cmd_train_stage2),
                     ("distill", cmd_distill)):
        p = sub.add_parser(name)
        run_args(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("sample")
    run_args(p)
    p.add_argument("--nfe", type=int, default=20)
    p.add_argument("--solver", choices=("em", "heun", "one-step"), default="em")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval")
    run_args(p)
    p.add_argument("--nfe", type=int, action="append", help="repeatable; defaults to eval.nfe")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="random discrete bridge problem, solved two ways")
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--memoryless", action="store_true")
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=1e-13)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("data")
    dsub = p.add_subparsers(dest="data_command", required=True)
    d = dsub.add_parser("dump")
    d.add_argument("--dataset", default="gaussian-ring-8", choices=KINDS)
    d.add_argument("--n", type=int, default=1000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--dim", type=int, default=2)
    d.add_argument("--scale", type=float, default=1.0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_data_dump)
    return ap


def _fail(code: int, kind: str, exc: Exception, **extra) -> int:
    line = {"error": kind, "message": str(exc), "exit_code": code, **extra}
    print(json.dumps(line, sort_keys=True), file=sys.stderr)
    return code


def cli(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        out = args.func(args)
    except (ConfigError, InputError, FileNotFoundError) as e:
        return _fail(2, type(e).__name__, e)
    except ValueError as e:
        return _fail(2, "ValueError", e)
    except (TrainingDivergence, SolverDivergence) as e:
        extra = {"iteration": getattr(e, "iteration", None), "step": getattr(e, "step", None)}
        return _fail(3, type(e).__name__, e, **{k: v for k, v in extra.items() if v is not None})
    except (NonFiniteLoss, WarmupFailed, SinkhornNotConverged, FloatingPointError) as e:
        return _fail(3, type(e).__name__, e)
    if out is not None:
        print(json.dumps(out, sort_keys=True))
    return 0


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
