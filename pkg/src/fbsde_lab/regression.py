"""Least-squares conditional expectations on state-dependent bases.

A :class:`Design` holds everything about one set of regressors (clip box,
basis columns, factorized normal matrix) so the same time slice can be fitted
against many targets cheaply, as the Picard sweeps do.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg

from . import kernels
from .errors import RegressionError
from .parallel import map_blocks

KINDS = ("polynomial", "piecewise-constant-bins", "local-linear-bins")
RIDGE = 1e-8
REFINE_STEPS = 3


@dataclass(frozen=True)
class BasisSpec:
    """Regression basis.

    ``size`` is the polynomial degree or the number of bins per dimension.
    ``domain`` (one ``(lo, hi)`` per state dimension) fixes the clip box; when
    omitted the box is the empirical ``clip_quantiles`` box of the states.
    """

    kind: str = "local-linear-bins"
    size: int = 50
    domain: Optional[Tuple[Tuple[float, float], ...]] = None
    clip_quantiles: Tuple[float, float] = (0.001, 0.999)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"bsde_regression: unknown basis kind {self.kind!r}")
        if self.kind == "polynomial" and not 0 <= self.size <= 10:
            raise ValueError("bsde_regression: polynomial degree must lie in [0, 10]")
        if self.kind != "polynomial" and self.size < 2:
            raise ValueError("bsde_regression: bins must be >= 2")
        if self.domain is not None:
            dom = tuple((float(lo), float(hi)) for lo, hi in self.domain)
            if any(not lo < hi for lo, hi in dom):
                raise ValueError("bsde_regression: every domain interval needs lo < hi")
            object.__setattr__(self, "domain", dom)


def default_basis(m: int) -> BasisSpec:
    return BasisSpec("local-linear-bins", 50) if m <= 2 else BasisSpec("polynomial", 3)


def _block_sum(parts):
    total = parts[0]
    for p in parts[1:]:
        total = tuple(a + b for a, b in zip(total, p))
    return total


class Design:
    """Regressors for one cloud of states ``(P, m)``."""

    def __init__(self, states: np.ndarray, basis: BasisSpec, slice_index: Optional[int] = None, workers: int = 1):
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        self.basis = basis
        self.slice_index = slice_index
        self.workers = workers
        self.n_samples, self.m = states.shape
        if basis.domain is not None:
            if len(basis.domain) != self.m:
                raise RegressionError(f"bsde_regression: domain has {len(basis.domain)} intervals for m={self.m}")
            self.lo = np.array([d[0] for d in basis.domain])
            self.hi = np.array([d[1] for d in basis.domain])
        else:
            ql, qh = basis.clip_quantiles
            self.lo = np.quantile(states, ql, axis=0)
            self.hi = np.quantile(states, qh, axis=0)
        spread = self.hi - self.lo
        self.active = np.flatnonzero(spread > 1e-12 * np.maximum(1.0, np.abs(self.lo)))
        clipped = self.clip(states)
        if basis.kind == "polynomial":
            self._init_polynomial(clipped)
        else:
            self._init_bins(clipped)
        if self.n_samples <= self.n_basis:
            raise RegressionError(
                f"bsde_regression: {self.n_samples} samples for {self.n_basis} basis functions{self._where()}",
                slice_index,
            )
        self._features_train = self._features(clipped)

    # -- shared helpers -------------------------------------------------
    def _where(self) -> str:
        return "" if self.slice_index is None else f" at time slice {self.slice_index}"

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def outside(self, x: np.ndarray) -> np.ndarray:
        """Rows of ``x`` that fall outside the clip box."""
        return np.any((x < self.lo) | (x > self.hi), axis=1)

    # -- polynomial -----------------------------------------------------
    def _init_polynomial(self, clipped):
        deg = self.basis.size
        k = len(self.active)
        self.exponents = [e for e in itertools.product(range(deg + 1), repeat=k) if sum(e) <= deg]
        self.exponents.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
        self.n_basis = len(self.exponents)
        self.n_cells = 1

    def _poly_columns(self, clipped):
        k = len(self.active)
        P = clipped.shape[0]
        if k == 0:
            return np.ones((P, 1))
        lo, hi = self.lo[self.active], self.hi[self.active]
        s = 2.0 * (clipped[:, self.active] - lo) / (hi - lo) - 1.0
        deg = self.basis.size
        vands = [legendre.legvander(s[:, j], deg) for j in range(k)]
        cols = np.empty((P, len(self.exponents)))
        for c, e in enumerate(self.exponents):
            col = np.ones(P)
            for j, p in enumerate(e):
                if p:
                    col = col * vands[j][:, p]
            cols[:, c] = col
        return cols

    # -- bins -----------------------------------------------------------
    def _init_bins(self, clipped):
        nb = self.basis.size
        self.edges = []
        for j in self.active:
            e = np.unique(np.quantile(clipped[:, j], np.linspace(0.0, 1.0, nb + 1)))
            self.edges.append(e)
        self.bins_per_dim = [max(len(e) - 1, 1) for e in self.edges]
        self.n_cells = int(np.prod(self.bins_per_dim)) if self.edges else 1
        self.local_linear = self.basis.kind == "local-linear-bins"
        self.q = 1 + (len(self.active) if self.local_linear else 0)
        self.n_basis = self.n_cells * self.q

    def _bin_index(self, clipped):
        P = clipped.shape[0]
        cell = np.zeros(P, dtype=np.int64)
        local = []
        for j, e, nb in zip(self.active, self.edges, self.bins_per_dim):
            x = clipped[:, j]
            idx = np.searchsorted(e[1:-1], x, side="right")
            cell = cell * nb + idx
            if self.local_linear:
                left, right = e[idx], e[np.minimum(idx + 1, len(e) - 1)]
                half = 0.5 * (right - left)
                half = np.where(half > 0, half, 1.0)
                local.append((x - 0.5 * (left + right)) / half)
        return cell, local

    def _features(self, clipped):
        if self.basis.kind == "polynomial":
            return self._poly_columns(clipped)
        cell, local = self._bin_index(clipped)
        feats = np.ones((clipped.shape[0], self.q))
        for c, col in enumerate(local):
            feats[:, c + 1] = col
        return cell, feats

    # -- normal equations -----------------------------------------------
    def _accumulate(self, targets, sw=None):
        """Normal-equation sums, optionally with rows scaled by ``sw = sqrt(weights)``."""
        ft = self._features_train
        if sw is not None:
            targets = targets * sw[:, None]
        if self.basis.kind == "polynomial":
            def work(a, b):
                A = ft[a:b] if sw is None else ft[a:b] * sw[a:b, None]
                return A.T @ A, A.T @ targets[a:b]
        else:
            cell, feats = ft
            if sw is not None:
                feats = feats * sw[:, None]

            def work(a, b):
                G, B, counts = kernels.accumulate_cells(cell[a:b], feats[a:b], targets[a:b], self.n_cells)
                return G, B, counts
        return _block_sum(map_blocks(work, self.n_samples, self.workers))

    def _factor(self, G):
        if self.basis.kind == "polynomial":
            delta = RIDGE * float(np.max(np.diag(G)))
            try:
                self._chol = linalg.cho_factor(G + delta * np.eye(G.shape[0]))
            except linalg.LinAlgError as exc:
                raise RegressionError(f"bsde_regression: rank-deficient design{self._where()}", self.slice_index) from exc
        else:
            delta = RIDGE * float(np.max(np.diagonal(G, axis1=1, axis2=2)))
            if delta <= 0:
                raise RegressionError(f"bsde_regression: empty design{self._where()}", self.slice_index)
            self._reg = G + delta * np.eye(self.q)[None]
        self._G = G

    def _solve(self, rhs):
        if self.basis.kind == "polynomial":
            return linalg.cho_solve(self._chol, rhs)
        return np.linalg.solve(self._reg, rhs)

    def _apply_G(self, coef):
        if self.basis.kind == "polynomial":
            return self._G @ coef
        return np.einsum("cab,cbr->car", self._G, coef)

    def _check_targets(self, targets):
        targets = np.asarray(targets, dtype=float)
        vector = targets.ndim == 1
        if vector:
            targets = targets[:, None]
        if targets.shape[0] != self.n_samples:
            raise RegressionError(f"bsde_regression: {targets.shape[0]} targets for {self.n_samples} states")
        if not np.all(np.isfinite(targets)):
            raise RegressionError(f"bsde_regression: non-finite regression targets{self._where()}", self.slice_index)
        return targets, vector

    def fit(self, targets: np.ndarray) -> "RegressionModel":
        """Least-squares fit of ``targets`` (shape ``(P,)`` or ``(P, r)``)."""
        targets, vector = self._check_targets(targets)
        acc = self._accumulate(targets)
        if not hasattr(self, "_G"):
            self._factor(acc[0])
            if self.basis.kind != "polynomial":
                self.counts = acc[2]
        rhs = acc[1]
        # ridge solve, then refine against the unregularized normal equations
        coef = self._solve(rhs)
        for _ in range(REFINE_STEPS):
            coef = coef + self._solve(rhs - self._apply_G(coef))
        if self.basis.kind != "polynomial":
            coef = self._fill_empty(coef, targets)
        return self._model(coef, targets, vector)

    def fit_weighted(self, targets: np.ndarray, weights: np.ndarray) -> "RegressionModel":
        """Least-squares fit minimizing ``sum_p w_p |targets_p - u(x_p)|^2``.

        With likelihood-ratio weights this is the self-normalized estimate of
        the conditional expectation under the reweighted measure, so targets
        that are constant (or lie in the basis span) are reproduced exactly
        whatever the weights.  The ridge is scaled per cell because weights
        may differ by orders of magnitude between cells.
        """
        targets, vector = self._check_targets(targets)
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.n_samples,) or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise RegressionError(f"bsde_regression: weights must be finite and nonnegative{self._where()}", self.slice_index)
        G, B = self._accumulate(targets, np.sqrt(w))[:2]
        if self.basis.kind == "polynomial":
            G, B = G[None], B[None]
        diag = np.diagonal(G, axis1=1, axis2=2)
        mass = G[:, 0, 0]
        if not np.any(mass > 0):
            raise RegressionError(f"bsde_regression: all weights vanish{self._where()}", self.slice_index)
        delta = RIDGE * np.max(diag, axis=1)
        reg = G + np.where(delta > 0, delta, 1.0)[:, None, None] * np.eye(G.shape[1])[None]
        coef = np.linalg.solve(reg, B)
        for _ in range(REFINE_STEPS):
            coef = coef + np.linalg.solve(reg, B - np.einsum("cab,cbr->car", G, coef))
        empty = mass <= 0
        if empty.any():
            # cells without weight fall back to the weighted global mean (flat)
            coef[empty] = 0.0
            coef[empty, 0, :] = w @ targets / w.sum()
        if self.basis.kind == "polynomial":
            coef = coef[0]
        return self._model(coef, targets, vector)

    def _model(self, coef, targets, vector) -> "RegressionModel":
        if not np.all(np.isfinite(coef)):
            raise RegressionError(f"bsde_regression: regression failed{self._where()}", self.slice_index)
        model = RegressionModel(self, coef, vector)
        fitted = model._predict_features(self._features_train)
        resid = targets - fitted
        if self.basis.kind == "polynomial":
            dof = max(self.n_samples - self.n_basis, 1)
            model.resid_var = np.sum(resid * resid, axis=0) / dof
        else:
            if not hasattr(self, "counts"):
                self.counts = np.bincount(self._features_train[0], minlength=self.n_cells)
            cell = self._features_train[0]
            ss = np.stack([np.bincount(cell, weights=resid[:, s] ** 2, minlength=self.n_cells) for s in range(resid.shape[1])], axis=1)
            dof = np.maximum(self.counts - self.q, 1)[:, None]
            model.resid_var = ss / dof
        model.fitted = fitted[:, 0] if vector else fitted
        return model

    def _fill_empty(self, coef, targets):
        empty = self.counts == 0
        if not empty.any():
            return coef
        # cells without samples fall back to the global mean (flat)
        coef = coef.copy()
        coef[empty] = 0.0
        coef[empty, 0, :] = targets.mean(axis=0)
        return coef


class RegressionModel:
    """A fitted conditional expectation; evaluate with :meth:`predict`."""

    def __init__(self, design: Design, coef: np.ndarray, vector: bool):
        self.design = design
        self.coef = coef
        self.vector = vector
        self.resid_var = None
        self.fitted = None

    @property
    def n_outputs(self) -> int:
        return self.coef.shape[-1]

    def _predict_features(self, ft):
        if self.design.basis.kind == "polynomial":
            A = ft
            out = np.zeros((A.shape[0], self.coef.shape[1]))
            for k in range(A.shape[1]):
                out += A[:, k : k + 1] * self.coef[k]
            return out
        cell, feats = ft
        return kernels.predict_cells(cell, feats, self.coef)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.design.m == 1 else x[None, :]
        out = self._predict_features(self.design._features(self.design.clip(x)))
        return out[:, 0] if self.vector else out

    __call__ = predict

    def limited(self, lo: float, hi: float) -> "RegressionModel":
        """Copy of the model whose predictions stay in ``[lo, hi]``.

        For local-linear bins each cell's slopes are scaled down about the
        cell's sample mean (a slope limiter), so the cell mean of the fit is
        unchanged unless the mean itself is out of range.  Piecewise-constant
        coefficients are clipped.  Polynomial fits are returned unchanged.
        """
        d = self.design
        if d.basis.kind == "polynomial":
            return self
        coef = self.coef.copy()
        if d.q == 1:
            coef = np.clip(coef, lo, hi)
        else:
            G = d._G
            n = np.maximum(G[:, 0, 0], 1.0)
            sbar = G[:, 0, 1:] / n[:, None]  # (C, q - 1) mean local coordinate
            slopes = coef[:, 1:, :]  # (C, q - 1, r)
            mean = coef[:, 0, :] + np.einsum("cj,cjr->cr", sbar, slopes)
            up = np.sum(np.maximum(slopes * (1.0 - sbar)[:, :, None], slopes * (-1.0 - sbar)[:, :, None]), axis=1)
            down = np.sum(np.minimum(slopes * (1.0 - sbar)[:, :, None], slopes * (-1.0 - sbar)[:, :, None]), axis=1)
            mean = np.clip(mean, lo, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                th_up = np.where(up > 0, (hi - mean) / up, 1.0)
                th_down = np.where(down < 0, (lo - mean) / down, 1.0)
            theta = np.clip(np.minimum(th_up, th_down), 0.0, 1.0)
            coef[:, 1:, :] = slopes * theta[:, None, :]
            coef[:, 0, :] = mean - np.einsum("cj,cjr->cr", sbar, coef[:, 1:, :])
        out = RegressionModel(d, coef, self.vector)
        out.resid_var = self.resid_var
        fitted = out._predict_features(d._features_train)
        out.fitted = fitted[:, 0] if self.vector else fitted
        return out

    def select(self, cols) -> "RegressionModel":
        """Model restricted to output columns ``cols`` (shares the design)."""
        cols = list(cols)
        sub = RegressionModel(self.design, self.coef[..., cols], vector=False)
        sub.resid_var = None if self.resid_var is None else self.resid_var[..., cols]
        sub.fitted = None if self.fitted is None else self.fitted[:, cols]
        return sub

    def stderr(self, x: np.ndarray) -> np.ndarray:
        """Standard error of the fitted value at ``x`` (homoscedastic within a cell)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.design.m == 1 else x[None, :]
        d = self.design
        ft = d._features(d.clip(x))
        if d.basis.kind == "polynomial":
            A = ft
            Ginv_A = linalg.cho_solve(d._chol, A.T)
            lev = np.sum(A.T * Ginv_A, axis=0)
            se = np.sqrt(lev[:, None] * self.resid_var[None, :])
        else:
            cell, feats = ft
            Ginv_f = np.linalg.solve(d._reg[cell], feats[:, :, None])[:, :, 0]
            lev = np.sum(feats * Ginv_f, axis=1)
            se = np.sqrt(lev[:, None] * self.resid_var[cell])
        return se[:, 0] if self.vector else se


def fit_conditional_expectation(
    targets: np.ndarray,
    states: np.ndarray,
    basis: BasisSpec,
    slice_index: Optional[int] = None,
    workers: int = 1,
) -> RegressionModel:
    """Least-squares estimate of ``E[targets | states]`` on ``basis``."""
    return Design(states, basis, slice_index=slice_index, workers=workers).fit(targets)
