"""Finite-difference solver for the one-dimensional semilinear PDE

    u_t + 1/2 sigma^2 u_xx + u_x (b + sigma g(t, x, u, u_x sigma)) + f(t, x, u, u_x sigma) = 0,
    u(T, x) = h(x),

used as an independent check on the Monte Carlo decoupling field.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from . import kernels
from .errors import DimensionError, StabilityError
from .model import CoefficientSet
from .paths import TimeGrid


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform grid with ``J`` interior nodes plus two boundary nodes."""

    x_min: float
    x_max: float
    J: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("pde_oracle: x_min must be below x_max")
        if int(self.J) != self.J or self.J < 16:
            raise ValueError(f"pde_oracle: need J >= 16 interior points, got {self.J!r}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.J + 1)

    @property
    def nodes(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.J + 2)
        x[-1] = self.x_max
        return x


@dataclass
class PdeSolution:
    grid: SpaceGrid
    tgrid: TimeGrid
    values: np.ndarray  # (M + 1, J + 2)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def at(self, t: float, x) -> np.ndarray:
        """Linear interpolation of ``u(t, .)`` at ``x`` (``t`` on the time grid)."""
        return np.interp(np.asarray(x, dtype=float), self.nodes, self.values[self.tgrid.index(t)])


def _gradient(u, dx, a, sig2):
    """Central differences, switched to upwind where ``|a| dx > sigma^2``."""
    central = (u[2:] - u[:-2]) / (2.0 * dx)
    fwd = (u[2:] - u[1:-1]) / dx
    bwd = (u[1:-1] - u[:-2]) / dx
    upwind = np.where(a > 0, fwd, bwd)
    return np.where(np.abs(a) * dx > sig2, upwind, central)


def solve_semilinear_pde(coeffs: CoefficientSet, sgrid: SpaceGrid, tgrid: TimeGrid) -> PdeSolution:
    """Backward IMEX time stepping.

    Diffusion is implicit (one tridiagonal solve per step); drift and ``f``
    are explicit, evaluated on the later time level.  The update is written
    for the increment ``u^n - u^{n+1}`` so constants are exact fixed points.
    Boundary nodes are extrapolated linearly (zero second derivative).

    Raises
    ------
    StabilityError
        If the explicit drift violates ``|a| dt / dx <= 1`` somewhere.
    """
    dims = coeffs.dims
    if (dims.m, dims.n, dims.d) != (1, 1, 1):
        raise DimensionError("pde_oracle: only m = n = d = 1 is supported")
    if abs(tgrid.T - coeffs.T) > 1e-12 * max(1.0, coeffs.T):
        raise ValueError("pde_oracle: time grid horizon differs from coefficient horizon")
    x = sgrid.nodes
    xi = x[1:-1, None]
    J, dx, dt = sgrid.J, sgrid.dx, tgrid.dt
    M = tgrid.M
    values = np.empty((M + 1, J + 2))
    values[M] = np.asarray(coeffs.h(x[:, None]), dtype=float).reshape(-1)

    for n in range(M - 1, -1, -1):
        u = values[n + 1]
        t_exp = tgrid.time(n + 1)
        s_exp = np.asarray(coeffs.sigma(t_exp, xi), dtype=float).reshape(-1)
        s_imp = np.asarray(coeffs.sigma(tgrid.time(n), xi), dtype=float).reshape(-1)
        sig2 = s_exp * s_exp
        if np.any(s_imp * s_imp <= 0):
            raise StabilityError("pde_oracle: sigma vanishes on the grid")
        ui = u[1:-1, None]
        b = np.asarray(coeffs.b(t_exp, xi), dtype=float).reshape(-1)
        # first pass: central gradient to evaluate g, then the upwind decision
        grad_c = ((u[2:] - u[:-2]) / (2.0 * dx))
        z_c = (grad_c * s_exp)[:, None, None]
        a = b + s_exp * np.asarray(coeffs.g(t_exp, xi, ui, z_c), dtype=float).reshape(-1)
        grad = _gradient(u, dx, a, sig2)
        z = (grad * s_exp)[:, None, None]
        a = b + s_exp * np.asarray(coeffs.g(t_exp, xi, ui, z), dtype=float).reshape(-1)
        cfl = np.max(np.abs(a)) * dt / dx
        if cfl > 1.0:
            raise StabilityError(
                f"pde_oracle: explicit drift CFL number {cfl:.3g} > 1 at step {n}; refine the time grid or widen dx"
            )
        fv = np.asarray(coeffs.f(t_exp, xi, ui, z), dtype=float).reshape(-1)
        lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
        rhs = dt * (0.5 * s_imp * s_imp * lap + a * grad + fv)

        r = 0.5 * dt * s_imp * s_imp / (dx * dx)
        lower = -r[1:]
        upper = -r[:-1]
        diag = 1.0 + 2.0 * r
        # end rows carry no implicit coupling; the boundary nodes are extrapolated
        diag[0] = diag[-1] = 1.0
        upper[0] = 0.0
        lower[-1] = 0.0
        delta = np.empty(J + 2)
        delta[1:-1] = kernels.solve_tridiagonal(lower, diag, upper, rhs)
        delta[0] = 2.0 * delta[1] - delta[2]
        delta[-1] = 2.0 * delta[-2] - delta[-3]
        values[n] = u + delta
        if not np.all(np.isfinite(values[n])):
            raise StabilityError(f"pde_oracle: non-finite values at time step {n}")
    return PdeSolution(grid=sgrid, tgrid=tgrid, values=values)


@dataclass(frozen=True)
class FieldComparison:
    sup: float
    rms: float
    per_time_sup: Tuple[float, ...]
    times: Tuple[float, ...]
    n_nodes: int


def compare_field(pde: PdeSolution, field, region: Tuple[float, float], times: Sequence[float]) -> FieldComparison:
    """Sup and RMS difference between ``pde`` and a decoupling field on PDE nodes in ``region``."""
    lo, hi = region
    x = pde.nodes
    mask = (x >= lo) & (x <= hi)
    if lo > hi or not mask.any():
        raise ValueError(f"pde_oracle: region [{lo}, {hi}] is disjoint from the PDE domain")
    if abs(pde.tgrid.T - field.grid.T) > 1e-12 * max(1.0, pde.tgrid.T):
        raise ValueError("pde_oracle: PDE and decoupling field have different horizons")
    xs = x[mask]
    sups, sq = [], 0.0
    for t in times:
        u_pde = pde.values[pde.tgrid.index(t), mask]
        u_mc = field.u_at(field.grid.index(t), xs[:, None]).reshape(-1)
        err = np.abs(u_mc - u_pde)
        sups.append(float(err.max()))
        sq += float(np.sum(err * err))
    return FieldComparison(
        sup=max(sups),
        rms=float(np.sqrt(sq / (len(times) * xs.size))),
        per_time_sup=tuple(sups),
        times=tuple(float(t) for t in times),
        n_nodes=int(xs.size),
    )
