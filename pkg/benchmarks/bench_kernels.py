"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--reps 5] [--sizes 500 2000 4000]

Prints best-of-reps wall time for each kernel and backend, the speedup,
and the largest relative disagreement between the two backends.
"""
import argparse
import time

import numpy as np

from bridgelab import _kernels_py as py_backend

try:
    from bridgelab import _kernels as c_backend
except ImportError:
    c_backend = None


def best_time(fn, reps):
    best = np.inf
    out = None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def rel_diff(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def cases(n, rng):
    a = rng.standard_normal((n, 2))
    b = rng.standard_normal((n, 2)) + 0.5
    # trajectories: (steps + 1, batch, dim)
    traj = np.cumsum(rng.standard_normal((101, n, 2)) * 0.1, axis=0)
    return [
        ("pairwise_distance_sum", lambda k: k.pairwise_distance_sum(a, b)),
        ("pairwise_distance_sum_self", lambda k: k.pairwise_distance_sum_self(a)),
        ("straightness", lambda k: k.straightness(traj)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 4000])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if c_backend is None:
        print("compiled backend not built; timing the python fallback only")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<28}{'n':>6}{'python s':>12}{'compiled s':>12}{'speedup':>9}{'rel diff':>11}")
    for n in args.sizes:
        for name, call in cases(n, rng):
            tp, op = best_time(lambda: call(py_backend), args.reps)
            if c_backend is None:
                print(f"{name:<28}{n:>6}{tp:>12.4f}{'-':>12}{'-':>9}{'-':>11}")
                continue
            tc, oc = best_time(lambda: call(c_backend), args.reps)
            print(f"{name:<28}{n:>6}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.2f}{rel_diff(op, oc):>11.1e}")


if __name__ == "__main__":
    main()
