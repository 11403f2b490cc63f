"""Backward regression Monte Carlo for the decoupled BSDE.

The forward paths ``F`` are simulated with drift ``b`` only; the BSDE

    dU = -fbar(t, F, U, V) dt + V dW,   U_T = h(F_T)

is solved slice by slice backwards in time, and Picard iteration on the
``(y, z)`` arguments of ``fbar`` yields the Markovian field ``(u, d)`` with
``U_t = u(t, F_t)`` and ``V_t = d(t, F_t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import NumericalError
from .model import CoefficientSet, augmented_driver, truncate_coefficients, y_bound
from .paths import PathEnsemble, TimeGrid
from .regression import BasisSpec, Design, RegressionModel, default_basis

QUADRATIC_CLIP_FACTOR = 10.0


@dataclass(frozen=True)
class PicardConfig:
    """Picard iteration settings.

    ``truncation_N=None`` means automatic: ``y_bound(C, T)`` when the
    coefficients carry an ``r = 0`` profile, no truncation otherwise.  Pass
    ``math.inf`` to switch truncation off explicitly.  ``init`` selects the
    zero field (``"zero"``) or a self-consistent first sweep.

    ``scheme="linear"`` regresses ``Y_{i+1} + fbar dt``.  ``scheme="exponential"``
    instead regresses ``Y_{i+1} + f dt`` by weighted least squares with
    weights ``exp(g dW - |g|^2 dt / 2)``: the exact one-step density between
    the ``b`` and ``b + sigma g`` Euler transitions, which keeps the backward
    step consistent with the recoupled forward step when ``|g| sqrt(dt)`` is
    not small.  Using the density as a weight rather than a factor on the
    target normalizes it within each cell, so constants pass through exactly.

    ``u_range=(lo, hi)`` clips fitted and predicted ``u`` values to an
    a-priori range of the exact field (e.g. ``(-N, N)`` under truncation at
    ``N``); the projection only removes regression overshoot.
    """

    max_iters: int = 20
    tol: float = 1e-4
    truncation_N: Optional[float] = None
    init: str = "zero"
    scheme: str = "linear"
    slice_iters: int = 0
    u_range: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("bsde_regression: max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("bsde_regression: tol must be positive")
        if self.truncation_N is not None and not self.truncation_N > 0:
            raise ValueError("bsde_regression: truncation_N must be positive")
        if self.init not in ("zero", "self-consistent"):
            raise ValueError(f"bsde_regression: unknown Picard init {self.init!r}")
        if self.slice_iters < 0:
            raise ValueError("bsde_regression: slice_iters must be >= 0")
        if self.scheme not in ("linear", "exponential"):
            raise ValueError(f"bsde_regression: unknown scheme {self.scheme!r}")
        if self.u_range is not None:
            lo, hi = (float(v) for v in self.u_range)
            if not lo < hi:
                raise ValueError("bsde_regression: u_range needs lo < hi")
            object.__setattr__(self, "u_range", (lo, hi))


@dataclass
class DecouplingField:
    """Per-slice regression models for ``u(t_i, .)`` and ``d(t_i, .)``.

    ``u_train`` and ``z_train`` hold the fitted values along the training
    paths; they are what the next Picard sweep feeds into the driver.
    """

    grid: TimeGrid
    d_dim: int
    n_dim: int
    u_models: List[RegressionModel]
    d_models: List[RegressionModel]
    u_train: np.ndarray
    z_train: np.ndarray
    picard_iterations: int = 1
    converged: bool = True
    sup_norm_estimate: float = 0.0
    history: List[float] = field(default_factory=list)
    truncation_N: Optional[float] = None
    experimental: bool = False
    u_range: Optional[Tuple[float, float]] = None

    def u_at(self, i: int, x: np.ndarray) -> np.ndarray:
        u = self.u_models[i].predict(x).reshape(-1, self.d_dim)
        return u if self.u_range is None else np.clip(u, *self.u_range)

    def d_at(self, i: int, x: np.ndarray) -> np.ndarray:
        i = min(i, len(self.d_models) - 1)
        return self.d_models[i].predict(x).reshape(-1, self.d_dim, self.n_dim)

    def u(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.u_at(self.grid.index(t), x)

    def d(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.d_at(self.grid.index(t), x)

    def outside(self, i: int, x: np.ndarray) -> np.ndarray:
        """Mask of states outside the training clip box of slice ``i``."""
        return self.u_models[i].design.outside(np.asarray(x, dtype=float).reshape(len(x), -1))

    def u_stderr(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.u_models[i].stderr(x).reshape(-1, self.d_dim)


class _ZeroField:
    """Picard starting point ``u_0 = 0, d_0 = 0`` on the training paths."""

    def __init__(self, P, M, d, n):
        self.u_train = np.zeros((P, M + 1, d))
        self.z_train = np.zeros((P, M, d, n))


def build_designs(paths: PathEnsemble, basis: BasisSpec, workers: int = 1) -> List[Design]:
    return [Design(paths.states[:, i], basis, slice_index=i, workers=workers) for i in range(paths.grid.M + 1)]


def _slice_major(paths: PathEnsemble):
    return (
        np.ascontiguousarray(paths.states.transpose(1, 0, 2)),
        np.ascontiguousarray(paths.increments.transpose(1, 0, 2)),
    )


def backward_sweep(
    paths: PathEnsemble,
    driver: Callable,
    h: Callable,
    basis: Optional[BasisSpec] = None,
    previous_field=None,
    designs: Optional[List[Design]] = None,
    driver_clip: Optional[float] = None,
    d_dim: Optional[int] = None,
    workers: int = 1,
    coupling: Optional[Callable] = None,
    slice_iters: int = 0,
    u_range: Optional[Tuple[float, float]] = None,
    _slices=None,
) -> DecouplingField:
    """One backward pass over slices ``M-1, ..., 0``.

    The Z-slice regresses ``(Y_{i+1} - E[Y_{i+1}|X_i]) dW_i^T / dt`` on
    ``X_i``; subtracting the conditional mean leaves the target unchanged in
    expectation and removes most of its variance.  The Y-slice regresses
    ``Y_{i+1} + fbar(t_i, X_i, y*, z*) dt``.  With ``previous_field`` the
    arguments ``(y*, z*)`` are that field's fitted values (Picard mode);
    without it they are ``E[Y_{i+1}|X_i]`` and the Z-slice just fitted.

    With ``coupling`` (the ``g`` evaluator) the step uses the exponential
    scheme of :class:`PicardConfig`; ``driver`` is then ``f`` rather than
    ``fbar``.  In self-consistent mode ``slice_iters`` damped passes replace
    ``y*`` by the slice's own fit, so that ``g`` sees ``u(t_i, .)`` exactly as
    the recoupled forward step will.  ``u_range`` bounds every fitted ``u``
    slice through :meth:`RegressionModel.limited`.
    """
    grid = paths.grid
    M, dt = grid.M, grid.dt
    # slice-major copies: every slice below is then a contiguous block
    X, dW = _slice_major(paths) if _slices is None else _slices
    P, n = dW.shape[1], dW.shape[2]
    if basis is None:
        basis = default_basis(paths.m)
    if designs is None:
        designs = build_designs(paths, basis, workers)

    terminal = np.asarray(h(X[M]), dtype=float)
    if terminal.ndim == 1:
        terminal = terminal[:, None]
    d = terminal.shape[1] if d_dim is None else d_dim
    if not np.all(np.isfinite(terminal)):
        raise NumericalError(f"bsde_regression: non-finite terminal values at slice {M}")
    if previous_field is not None:
        prev_u = np.ascontiguousarray(previous_field.u_train.transpose(1, 0, 2))
        prev_z = np.ascontiguousarray(previous_field.z_train.transpose(1, 0, 2, 3))

    u_train = np.empty((M + 1, P, d))
    z_train = np.empty((M, P, d, n))
    u_models: List[RegressionModel] = [None] * (M + 1)
    d_models: List[RegressionModel] = [None] * M

    def bounded(model):
        return model if u_range is None else model.limited(*u_range)

    m_term = bounded(designs[M].fit(terminal))
    u_models[M] = m_term
    u_train[M] = m_term.fitted
    y_next = terminal
    nz = d * n
    for i in range(M - 1, -1, -1):
        t = grid.time(i)
        x = X[i]
        des = designs[i]
        cond = des.fit(y_next)
        centered = y_next - cond.fitted
        z_target = (centered[:, :, None] * dW[i][:, None, :]).reshape(P, nz) / dt
        if previous_field is None:
            z_model = des.fit(z_target)
            y_star = cond.fitted
            z_star = z_model.fitted.reshape(P, d, n)
        else:
            y_star = prev_u[i]
            z_star = prev_z[i]
        def fit_y(y_star, z_star, extra=None):
            drv = np.asarray(driver(t, x, y_star, z_star), dtype=float)
            if driver_clip is not None:
                drv = np.clip(drv, -driver_clip, driver_clip)
            y_target = y_next + drv * dt
            if coupling is None:
                if extra is None:
                    return des.fit(y_target)
                return des.fit(np.concatenate([extra, y_target], axis=1))
            gv = np.asarray(coupling(t, x, y_star, z_star), dtype=float)
            logw = np.sum(gv * dW[i], axis=1) - 0.5 * np.sum(gv * gv, axis=1) * dt
            # drv is a function of X_i, so weighting it leaves it unchanged
            return des.fit_weighted(y_target, np.exp(logw - logw.max()))

        if previous_field is None:
            u_model = bounded(fit_y(y_star, z_star))
            # damped fixed point y* = u(t_i, .) within the slice
            for _ in range(slice_iters):
                y_star = 0.5 * (y_star + u_model.fitted)
                u_model = bounded(fit_y(y_star, z_star))
        elif coupling is None:
            joint = fit_y(y_star, z_star, extra=z_target)
            z_model = joint.select(range(nz))
            u_model = bounded(joint.select(range(nz, nz + d)))
        else:
            z_model = des.fit(z_target)
            u_model = bounded(fit_y(y_star, z_star))
        u_models[i] = u_model
        d_models[i] = z_model
        u_train[i] = u_model.fitted
        z_train[i] = z_model.fitted.reshape(P, d, n)
        y_next = u_train[i]

    u_train = u_train.transpose(1, 0, 2)
    z_train = z_train.transpose(1, 0, 2, 3)
    if not (np.all(np.isfinite(u_train)) and np.all(np.isfinite(z_train))):
        raise NumericalError("bsde_regression: non-finite decoupling field")
    return DecouplingField(
        grid=grid,
        d_dim=d,
        n_dim=n,
        u_models=u_models,
        d_models=d_models,
        u_train=u_train,
        z_train=z_train,
        sup_norm_estimate=float(np.max(np.abs(u_train))),
        u_range=u_range,
    )


def resolve_truncation(coeffs: CoefficientSet, cfg: PicardConfig) -> Optional[float]:
    if cfg.truncation_N is not None:
        return None if math.isinf(cfg.truncation_N) else float(cfg.truncation_N)
    prof = coeffs.profile
    if prof is not None and prof.constants.r == 0 and prof.backward_condition != "none":
        return y_bound(prof.constants.C, coeffs.T)
    return None


def solve_decoupled_bsde(
    paths: PathEnsemble,
    coeffs: CoefficientSet,
    basis: Optional[BasisSpec] = None,
    cfg: PicardConfig = PicardConfig(),
    workers: int = 1,
) -> DecouplingField:
    """Picard iteration of :func:`backward_sweep` until the sup-over-paths
    change of ``Y`` drops below ``cfg.tol``.

    Non-convergence is reported through ``converged=False``, not raised.
    """
    grid = paths.grid
    if basis is None:
        basis = default_basis(paths.m)
    N = resolve_truncation(coeffs, cfg)
    eff = truncate_coefficients(coeffs, N) if N is not None else coeffs
    if cfg.scheme == "exponential":
        driver, coupling = eff.f, eff.g
    else:
        driver, coupling = augmented_driver(eff), None
    quadratic = coeffs.profile is not None and coeffs.profile.backward_condition in ("B2", "B3")
    clip = None
    if quadratic:
        bound = N if N is not None else y_bound(coeffs.profile.constants.C, coeffs.T)
        clip = QUADRATIC_CLIP_FACTOR * bound / grid.dt
    designs = build_designs(paths, basis, workers)
    slices = _slice_major(paths)
    P, M, n, d = paths.n_paths, grid.M, paths.increments.shape[2], coeffs.dims.d

    prev = None if cfg.init == "self-consistent" else _ZeroField(P, M, d, n)
    history: List[float] = []
    field_ = None
    converged = False
    for k in range(1, cfg.max_iters + 1):
        field_ = backward_sweep(
            paths, driver, eff.h, basis, previous_field=prev, designs=designs, driver_clip=clip, d_dim=d, workers=workers,
            coupling=coupling, slice_iters=cfg.slice_iters, _slices=slices,
            u_range=cfg.u_range,
        )
        if prev is not None:
            diff = float(np.max(np.abs(field_.u_train - prev.u_train)))
            history.append(diff)
            if diff <= cfg.tol:
                converged = True
                break
        elif cfg.max_iters == 1:
            converged = True
        prev = field_
    field_.picard_iterations = k
    field_.converged = converged
    field_.history = history
    field_.truncation_N = N
    field_.experimental = quadratic
    return field_
