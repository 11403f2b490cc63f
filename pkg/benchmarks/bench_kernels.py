"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--paths 200000] [--repeat 5] [--csv out.csv]

Each kernel is called once untimed (numba compilation, cache warm-up), then
``--repeat`` times; the best wall-clock time is reported together with the
largest absolute difference between the two outputs.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from fbsde_lab import kernels
from fbsde_lab.kernels import stream_key


def best_time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def cases(n_paths, rng):
    key = stream_key(7)
    yield "counter_normals", (key, 0, n_paths, 50, 1)

    bins, q = 50, 2
    cells = rng.integers(0, bins, n_paths)
    feats = np.column_stack([np.ones(n_paths), rng.uniform(-1, 1, n_paths)])
    targets = rng.standard_normal((n_paths, 2))
    yield "accumulate_cells", (cells, feats, targets, bins)

    coef = rng.standard_normal((bins, q, 2))
    yield "predict_cells", (cells, feats, coef)

    J = 1599
    lower = rng.uniform(-0.4, -0.1, J - 1)
    upper = rng.uniform(-0.4, -0.1, J - 1)
    diag = 1.0 + np.abs(np.r_[lower, 0.0]) + np.abs(np.r_[0.0, upper])
    yield "solve_tridiagonal", (lower, diag, upper, rng.standard_normal(J))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=200_000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="also write the table as CSV")
    args = p.parse_args(argv)
    if not kernels.NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    rng = np.random.default_rng(args.seed)
    rows = []
    for name, call in cases(args.paths, rng):
        f_np = getattr(kernels, f"{name}_numpy")
        f_nb = getattr(kernels, f"{name}_numba")
        t_np = best_time(lambda: f_np(*call), args.repeat)
        t_nb = best_time(lambda: f_nb(*call), args.repeat)
        rows.append((name, t_np, t_nb, t_np / t_nb, max_diff(f_np(*call), f_nb(*call))))

    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, t_np, t_nb, sp, diff in rows:
        print(f"{name:<20}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{sp:>10.2f}{diff:>13.2e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kernel", "numpy_s", "numba_s", "speedup", "max_abs_diff"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
