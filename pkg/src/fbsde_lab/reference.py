"""Closed-form benchmark problems and the oracle suite run by ``fbsde-lab benchmarks``.

All problems are one-dimensional with ``b = 0`` and ``sigma = 1``:

* ``linear``: ``f = -0.1 y``, ``g = 0``, ``h(x) = x``, ``x0 = 1``; ``Y0 = exp(-0.1)``.
* ``digital``: ``f = g = 0``, ``h = 1{x >= 0}``; ``u(0, x) = Phi(x / sqrt(T))``.
* ``riccati``: ``f = 0``, ``g = -y``, ``h(x) = x``; ``u(t, x) = x / (1 + T - t)``.
* ``bounded-coupling``: ``f = 0``, ``g = -y``, ``h = 1{x >= 0}``, declared
  ``B1`` with ``r = 0``, so ``Y`` is truncated at ``y_bound(C, T)``.

Only the ``mc`` section of a configuration (paths, steps, seed) and the
worker count vary between runs.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from .bsde import PicardConfig
from .girsanov import martingale_diagnostic, shift_noise, stochastic_exponential
from .model import CoefficientSet, ConditionProfile, Dimensions, GrowthConstants, y_bound
from .paths import TimeGrid, sample_noise, simulate_sde
from .pipeline import solve_decoupled_only, solve_fbsde
from .regression import BasisSpec


def _zeros(t, x):
    return np.zeros_like(x)


def _unit_sigma(t, x):
    return np.ones((x.shape[0], 1, 1))


def _no_coupling(t, x, y, z):
    return np.zeros((x.shape[0], 1))


def _zero_driver(t, x, y, z):
    return np.zeros_like(y)


def _minus_y(t, x, y, z):
    return -y


def _identity(x):
    return x.copy()


def _digital(x):
    return (x >= 0.0).astype(float)


def linear_benchmark(T: float = 1.0, x0: float = 1.0) -> CoefficientSet:
    return CoefficientSet(
        dims=Dimensions(1, 1, 1), b=_zeros, sigma=_unit_sigma, f=lambda t, x, y, z: -0.1 * y, g=_no_coupling,
        h=_identity, T=T, x0=[x0], name="benchmark:linear",
    )


def digital_benchmark(T: float = 1.0) -> CoefficientSet:
    return CoefficientSet(
        dims=Dimensions(1, 1, 1), b=_zeros, sigma=_unit_sigma, f=_zero_driver, g=_no_coupling, h=_digital,
        T=T, x0=[0.0], name="benchmark:digital",
    )


def riccati_benchmark(T: float = 1.0, x0: float = 1.0) -> CoefficientSet:
    return CoefficientSet(
        dims=Dimensions(1, 1, 1), b=_zeros, sigma=_unit_sigma, f=_zero_driver, g=_minus_y, h=_identity,
        T=T, x0=[x0], name="benchmark:riccati",
    )


def bounded_coupling_benchmark(T: float = 1.0) -> CoefficientSet:
    profile = ConditionProfile("F1", "B1", "none", GrowthConstants(C=1.0, r=0.0, epsilon=1.0, kappa=1.0))
    return CoefficientSet(
        dims=Dimensions(1, 1, 1), b=_zeros, sigma=_unit_sigma, f=_zero_driver, g=_minus_y, h=_digital,
        T=T, x0=[0.0], profile=profile, name="benchmark:bounded-coupling",
    )


BENCHMARK_PROBLEMS: Dict[str, Callable[[], CoefficientSet]] = {
    "linear": linear_benchmark,
    "digital": digital_benchmark,
    "riccati": riccati_benchmark,
    "bounded-coupling": bounded_coupling_benchmark,
}


def riccati_exact(t, x, T: float = 1.0):
    return np.asarray(x, dtype=float) / (1.0 + T - np.asarray(t, dtype=float))


DIGITAL_SPREAD = 1.0
DIGITAL_NODES = np.linspace(-1.5, 1.5, 61)


@dataclass(frozen=True)
class BenchmarkResult:
    name: str
    quantity: str
    value: float
    reference: float
    error: float
    tolerance: float
    passed: bool


def _row(name, quantity, value, reference, tol, error=None) -> BenchmarkResult:
    err = abs(value - reference) if error is None else error
    return BenchmarkResult(name, quantity, float(value), float(reference), float(err), float(tol), bool(err <= tol))


def run_benchmarks(
    n_paths: int = 200_000,
    M: int = 50,
    seed: int = 0,
    workers: int = 1,
    basis: Optional[BasisSpec] = None,
    cfg: PicardConfig = PicardConfig(),
) -> Tuple[List[BenchmarkResult], Dict[str, float]]:
    """Run every closed-form oracle; returns the result rows and per-stage seconds."""
    rows: List[BenchmarkResult] = []
    timings: Dict[str, float] = {}

    def _linear():
        c = linear_benchmark()
        sol = solve_fbsde(c, TimeGrid(c.T, M), n_paths, seed, basis, cfg, workers=workers)
        rows.append(_row("linear", "Y0", sol.Y0, math.exp(-0.1), 0.01))
        # vacuity: with g = 0 the coupled output must equal the decoupled solve bit for bit
        F, fld = solve_decoupled_only(c, TimeGrid(c.T, M), n_paths, seed, basis, cfg, workers=workers)
        same = (
            np.array_equal(sol.X.states, F.states)
            and np.array_equal(sol.Y, fld.u_train)
            and np.array_equal(sol.Z, fld.z_train)
        )
        rows.append(BenchmarkResult("vacuity", "coupled == decoupled (bitwise)", float(same), 1.0,
                                    0.0 if same else 1.0, 0.0, same))

    def _digital_run():
        c = digital_benchmark()
        sol = solve_fbsde(c, TimeGrid(c.T, M), n_paths, seed, basis, cfg, initial_spread=DIGITAL_SPREAD,
                          workers=workers)
        u0 = sol.field.u_at(0, DIGITAL_NODES[:, None])[:, 0]
        err = float(np.max(np.abs(u0 - norm.cdf(DIGITAL_NODES / math.sqrt(c.T)))))
        rows.append(_row("digital", "sup |u(0,x) - Phi(x)| on [-1.5, 1.5]", err, 0.0, 0.02))

    def _riccati():
        c = riccati_benchmark()
        sol = solve_fbsde(c, TimeGrid(c.T, M), n_paths, seed, basis, cfg, workers=workers)
        rows.append(_row("riccati", "Y0", sol.Y0, float(riccati_exact(0.0, c.x0[0], c.T)), 0.02))
        rows.append(_row("riccati", "recoupling identity max error", sol.diagnostics.recoupling_error, 0.0, 1e-12))

    def _bounded_coupling():
        c = bounded_coupling_benchmark()
        sol = solve_fbsde(c, TimeGrid(c.T, M), n_paths, seed, basis, cfg, workers=workers)
        yb = y_bound(c.profile.constants.C, c.T)
        d = sol.diagnostics
        rows.append(_row("bounded-coupling", "y_sup - y_bound (<= 0.01)", max(d.y_sup - yb, 0.0), 0.0, 0.01))

    def _exponential():
        grid = TimeGrid(1.0, M)
        noise = sample_noise(grid, n_paths, 1, seed=seed, workers=workers)
        ep = stochastic_exponential(np.full((n_paths, M, 1), 0.5), noise, grid)
        rep = martingale_diagnostic(ep)
        rows.append(_row("exponential", "|mean(E_T) - 1| (tol 3 stderr)", rep.terminal_mean, 1.0, 3.0 * rep.stderr))
        # drift b + sigma g on W versus drift b on the shifted noise
        b = lambda t, x: 0.2 * np.sin(x)
        sig = lambda t, x: (1.0 + 0.3 * np.cos(x))[:, :, None]
        gfun = lambda t, x: 0.5 * np.tanh(x)
        X = simulate_sde(lambda t, x: b(t, x) + np.einsum("pij,pj->pi", sig(t, x), gfun(t, x)), sig, [0.3], noise,
                         grid, workers=workers)
        gX = np.stack([gfun(grid.time(i), X.states[:, i]) for i in range(M)], axis=1)
        X_alt = simulate_sde(b, sig, [0.3], shift_noise(noise, gX, grid, sign=-1), grid, workers=workers)
        rows.append(_row("exponential", "shift identity max path error", float(np.max(np.abs(X_alt.states - X.states))),
                         0.0, 1e-12))

    stages = [
        ("linear", _linear),
        ("digital", _digital_run),
        ("riccati", _riccati),
        ("bounded-coupling", _bounded_coupling),
        ("exponential", _exponential),
    ]
    for stage, fn in stages:
        t0 = time.perf_counter()
        fn()
        timings[stage] = time.perf_counter() - t0
    return rows, timings


__all__ = [
    "BENCHMARK_PROBLEMS",
    "BenchmarkResult",
    "bounded_coupling_benchmark",
    "digital_benchmark",
    "linear_benchmark",
    "riccati_benchmark",
    "riccati_exact",
    "run_benchmarks",
]
