"""Sampling audit of the condition catalogue.

Every declared flag of a :class:`ConditionProfile` is broken into elementary
inequalities that are evaluated on a finite grid of ``(t, x, y, z)`` points.
A violation refutes the flag and is reported with a witness; the absence of
violations only *supports* it.  Parts of a condition that cannot be sampled
(the modulus ``theta`` of F2, the splitting in B2) are tagged ``declared``.

For ``r = 0`` the growth function ``rho_0`` is never pinned down, so the
``g`` envelope is checked on the sampled ``y`` box only; choose that box as
the a-priori range of ``Y`` (the truncation ball).
"""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .model import CoefficientSet, ConditionProfile, augmented_driver

SPACINGS = (1e-1, 1e-2, 1e-3)
GROWTH_PER_DECADE = 3.0
SLACK = 1e-12
SHELLS = (1.0, 10.0, 100.0)

SUPPORTED = "numerically-supported"
REFUTED = "numerically-refuted"
DECLARED = "declared"


@dataclass(frozen=True)
class SampleSpec:
    """Finite sample sets: ``t`` ``(K_t,)``, ``x`` ``(K_x, m)``, ``y`` ``(K_y, d)``, ``z`` ``(K_z, d, n)``."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("t", "x", "y", "z"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if any(getattr(self, k).size == 0 for k in ("t", "x", "y", "z")):
            raise ValueError("model_core: sample_spec is empty; every grid needs at least one point")

    @classmethod
    def box(
        cls,
        coeffs: CoefficientSet,
        x_radius: float = 3.0,
        y_radius: float = 1.0,
        z_radius: float = 3.0,
        n_t: int = 5,
        n_x: int = 41,
        n_y: int = 9,
        n_z: int = 9,
        seed: int = 0,
    ) -> "SampleSpec":
        """Grids on boxes centred at ``x0`` (for ``x``) and at 0 (for ``y``, ``z``).

        One-dimensional factors are uniform grids; product grids are used while
        they stay below 4096 points, uniform random points otherwise.
        """
        if min(n_t, n_x, n_y, n_z) < 1:
            raise ValueError("model_core: sample_spec is empty; every grid needs at least one point")
        m, n, d = coeffs.dims.m, coeffs.dims.n, coeffs.dims.d
        rng = np.random.default_rng(seed)
        t = np.linspace(0.0, coeffs.T, n_t)
        x = coeffs.x0 + _cube(m, n_x, x_radius, rng)
        y = _cube(d, n_y, y_radius, rng)
        z = _cube(d * n, n_z, z_radius, rng).reshape(-1, d, n)
        return cls(t=t, x=x, y=y, z=z)


def _cube(k: int, n_per_dim: int, radius: float, rng) -> np.ndarray:
    axis = np.linspace(-radius, radius, n_per_dim) if n_per_dim > 1 else np.zeros(1)
    if n_per_dim ** k <= 4096:
        return np.array(list(itertools.product(axis, repeat=k)), dtype=float).reshape(-1, k)
    return rng.uniform(-radius, radius, size=(4096, k))


@dataclass
class CheckResult:
    flag: str
    name: str
    status: str
    worst: float = float("nan")  # largest observed value / bound ratio, or growth ratio
    witness: Optional[dict] = None
    note: str = ""

    def line(self) -> str:
        s = f"[{self.flag}] {self.name}: {self.status}"
        if np.isfinite(self.worst):
            s += f" (worst {self.worst:.4g})"
        if self.witness:
            s += " witness " + ", ".join(f"{k}={_fmt(v)}" for k, v in self.witness.items())
        if self.note:
            s += f" -- {self.note}"
        return s


def _fmt(v) -> str:
    a = np.asarray(v, dtype=float)
    if a.size == 1:
        return f"{float(a.ravel()[0]):.6g}"
    return "[" + " ".join(f"{u:.6g}" for u in a.ravel()) + "]"


@dataclass
class AuditReport:
    checks: List[CheckResult]
    tags: Dict[str, str]
    epsilon_tight: float
    benes_ratio: float
    profile: ConditionProfile
    n_points: int

    @property
    def refuted(self) -> bool:
        return any(v == REFUTED for v in self.tags.values())

    def lines(self) -> List[str]:
        out = [f"{flag}: {tag}" for flag, tag in self.tags.items()]
        out.append(f"tightest epsilon: {self.epsilon_tight:.6g}")
        out.append(f"Benes surrogate sup|F|/(1+|x0|+sup|W|): {self.benes_ratio:.4g}")
        out.append(f"sample points: {self.n_points}")
        out.extend(c.line() for c in self.checks)
        return out


# -- sampling helpers ---------------------------------------------------------
class _Points:
    """Flattened product ``t x (x, y, z)``; batches are taken per time."""

    def __init__(self, spec: SampleSpec):
        nx, ny, nz = len(spec.x), len(spec.y), len(spec.z)
        ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        self.x = spec.x[ix.ravel()]
        self.y = spec.y[iy.ravel()]
        self.z = spec.z[iz.ravel()]
        self.t = spec.t
        self.size = len(self.x) * len(self.t)


def _norm(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.sqrt(np.sum(a.reshape(a.shape[0], -1) ** 2, axis=1))


def _bound_check(flag, name, value_fn, bound_fn, spec: SampleSpec, pts: _Points, xonly=False) -> CheckResult:
    """``value <= bound`` at every sample, with relative slack ``SLACK``."""
    worst, witness = 0.0, None
    for t in spec.t:
        if xonly:
            x, y, z = spec.x, None, None
        else:
            x, y, z = pts.x, pts.y, pts.z
        v = value_fn(t, x, y, z)
        bnd = bound_fn(t, x, y, z)
        ratio = np.where(bnd > 0, v / np.where(bnd > 0, bnd, 1.0), np.where(v > 0, np.inf, 0.0))
        k = int(np.argmax(ratio))
        if ratio[k] > worst or witness is None:
            worst = float(ratio[k])
            witness = {"t": t, "x": x[k], "value": v[k], "bound": bnd[k]}
            if y is not None:
                witness.update(y=y[k], z=z[k])
    ok = worst <= 1.0 + SLACK
    return CheckResult(flag, name, SUPPORTED if ok else REFUTED, worst, None if ok else witness)


def _lipschitz_blowup(flag, name, fn, spec: SampleSpec) -> CheckResult:
    """Divided differences of ``fn(t, x)`` in ``x`` at shrinking spacings."""
    m = spec.x.shape[1]
    L, wit = [], []
    for h in SPACINGS:
        best, w = 0.0, None
        for t in spec.t:
            base = np.asarray(fn(t, spec.x), dtype=float)
            for j in range(m):
                xs = spec.x.copy()
                xs[:, j] += h
                q = _norm(np.asarray(fn(t, xs), dtype=float) - base) / h
                k = int(np.argmax(q))
                if q[k] > best:
                    best, w = float(q[k]), {"t": t, "x": spec.x[k], "direction": j, "spacing": h, "quotient": q[k]}
        L.append(best)
        wit.append(w)
    growth = [L[i + 1] / L[i] if L[i] > 0 else (np.inf if L[i + 1] > 1e-8 else 1.0) for i in range(len(L) - 1)]
    blown = L[-1] > 1e-8 and all(g >= GROWTH_PER_DECADE for g in growth)
    return CheckResult(
        flag, name, REFUTED if blown else SUPPORTED, max(growth), wit[-1] if blown else None,
        note="difference quotients " + ", ".join(f"{v:.3g}" for v in L),
    )


# -- elementary checks ----------------------------------------------------------
def _ellipticity(coeffs: CoefficientSet, spec: SampleSpec, eps: float):
    lo, hi, wit = np.inf, 0.0, None
    for t in spec.t:
        s = np.asarray(coeffs.sigma(t, spec.x), dtype=float)
        ev = np.linalg.eigvalsh(np.einsum("pij,pkj->pik", s, s))
        # sigma sigma^T is m x m; with n < m it is singular by construction
        k = int(np.argmin(ev[:, 0]))
        if ev[k, 0] < lo:
            lo, wit = float(ev[k, 0]), {"t": t, "x": spec.x[k], "eigenvalue": ev[k, 0]}
        hi = max(hi, float(ev[:, -1].max()))
    tight = np.inf if lo <= 0 else max(1.0 / lo, hi)
    ok = lo > 0 and lo * eps >= 1.0 - SLACK and hi <= eps * (1.0 + SLACK)
    res = CheckResult(
        "standing", "ellipticity eps^-1 <= eig(sigma sigma^T) <= eps", SUPPORTED if ok else REFUTED,
        tight / eps if np.isfinite(tight) else np.inf, None if ok else wit,
        note=f"eigenvalues in [{lo:.6g}, {hi:.6g}]",
    )
    return res, tight


def _constant_sigma(coeffs: CoefficientSet, spec: SampleSpec) -> CheckResult:
    ref = np.asarray(coeffs.sigma(spec.t[0], spec.x[:1]), dtype=float)[0]
    worst, wit = 0.0, None
    for t in spec.t:
        s = np.asarray(coeffs.sigma(t, spec.x), dtype=float)
        dev = _norm(s - ref[None])
        k = int(np.argmax(dev))
        if dev[k] > worst:
            worst, wit = float(dev[k]), {"t": t, "x": spec.x[k], "deviation": dev[k]}
    tol = SLACK * max(1.0, float(np.linalg.norm(ref)))
    ok = worst <= tol
    return CheckResult("F3", "sigma constant", SUPPORTED if ok else REFUTED, worst, None if ok else wit)


def _kappa(coeffs: CoefficientSet, spec: SampleSpec, kappa: float) -> CheckResult:
    """``|b(t, 0)| + sup_{|x - x'| <= 1} |b(t, x) - b(t, x')| <= kappa`` on samples."""
    m = spec.x.shape[1]
    shifts = [s * e for e in np.eye(m) for s in (-1.0, -0.5, 0.5, 1.0)]
    worst, wit = 0.0, None
    for t in spec.t:
        b0 = float(_norm(np.asarray(coeffs.b(t, np.zeros((1, m))), dtype=float))[0])
        base = np.asarray(coeffs.b(t, spec.x), dtype=float)
        osc = max(float(_norm(np.asarray(coeffs.b(t, spec.x + s), dtype=float) - base).max()) for s in shifts)
        if b0 + osc > worst:
            worst, wit = b0 + osc, {"t": t, "b(t,0)": b0, "oscillation": osc}
    ok = worst <= kappa * (1.0 + SLACK)
    return CheckResult("F3", "|b(t,0)| + unit oscillation of b <= kappa", SUPPORTED if ok else REFUTED,
                       worst / kappa, None if ok else wit)


def _continuity_yz(flag, fbar, spec: SampleSpec, pts: _Points) -> CheckResult:
    """``fbar`` continuous in ``(y, z)``: increments must shrink with the spacing."""
    d, n = spec.z.shape[1], spec.z.shape[2]
    rng = np.random.default_rng(1)
    dy = rng.standard_normal((len(pts.x), d))
    dz = rng.standard_normal((len(pts.x), d, n))
    scale = np.sqrt(np.sum(dy * dy, axis=1) + np.sum(dz * dz, axis=(1, 2)))
    dy, dz = dy / scale[:, None], dz / scale[:, None, None]
    jumps, wit = [], None
    for h in SPACINGS:
        best = 0.0
        for t in spec.t:
            base = np.asarray(fbar(t, pts.x, pts.y, pts.z), dtype=float)
            moved = np.asarray(fbar(t, pts.x, pts.y + h * dy, pts.z + h * dz), dtype=float)
            diff = _norm(moved - base)
            k = int(np.argmax(diff))
            if diff[k] > best:
                best = float(diff[k])
                if h == SPACINGS[-1]:
                    wit = {"t": t, "x": pts.x[k], "y": pts.y[k], "z": pts.z[k], "jump": diff[k]}
        jumps.append(best)
    # a continuous map shrinks its increments; a jump keeps them at the jump size
    jumpy = jumps[-1] > 1e-8 and jumps[-1] >= 0.3 * jumps[0]
    return CheckResult(flag, "fbar continuous in (y, z)", REFUTED if jumpy else SUPPORTED,
                       jumps[-1] / jumps[0] if jumps[0] > 0 else 0.0, wit if jumpy else None,
                       note="increments " + ", ".join(f"{v:.3g}" for v in jumps))


def _shell_growth(flag, name, fn, spec: SampleSpec, power: float) -> CheckResult:
    """Growth of ``sup |fn|`` on z-shells of radius 1, 10, 100 relative to ``R^power``.

    Refuted when ``sup / (1 + R^power)`` keeps growing by the per-decade
    factor between consecutive shells.
    """
    d, n = spec.z.shape[1], spec.z.shape[2]
    rng = np.random.default_rng(2)
    dirs = rng.standard_normal((16, d, n))
    dirs /= np.sqrt(np.sum(dirs * dirs, axis=(1, 2)))[:, None, None]
    q = []
    x = spec.x
    for R in SHELLS:
        best = 0.0
        for t in spec.t:
            for y in spec.y:
                for u in dirs:
                    P = len(x)
                    v = _norm(np.asarray(fn(t, x, np.repeat(y[None], P, 0), np.repeat((R * u)[None], P, 0)), dtype=float))
                    best = max(best, float(v.max()))
        q.append(best / (1.0 + R ** power))
    growth = [q[i + 1] / q[i] if q[i] > 0 else (np.inf if q[i + 1] > 1e-12 else 1.0) for i in range(len(q) - 1)]
    bad = all(g >= GROWTH_PER_DECADE for g in growth)
    return CheckResult(flag, name, REFUTED if bad else SUPPORTED, max(growth),
                       {"normalized sups": np.array(q)} if bad else None)


def _partial(fbar, which: str, h: float = 1e-6):
    """Central-difference gradient of scalar ``fbar`` in ``y`` or ``z``."""

    def grad(t, x, y, z):
        if which == "y":
            e = h * (1.0 + np.abs(y))
            return (np.asarray(fbar(t, x, y + e, z)) - np.asarray(fbar(t, x, y - e, z))) / (2 * e)
        cols = []
        P, d, n = z.shape
        for j in range(n):
            e = np.zeros_like(z)
            e[:, 0, j] = h * (1.0 + np.abs(z[:, 0, j]))
            step = e[:, 0, j][:, None]
            cols.append((np.asarray(fbar(t, x, y, z + e)) - np.asarray(fbar(t, x, y, z - e))) / (2 * step))
        return np.concatenate(cols, axis=1)

    return grad


def _differentiable(flag, fbar, spec: SampleSpec, pts: _Points) -> CheckResult:
    """One-sided difference quotients in ``y`` must agree (no kinks in ``(y, z)``)."""
    h = 1e-5
    worst, wit = 0.0, None
    for t in spec.t:
        f0 = np.asarray(fbar(t, pts.x, pts.y, pts.z), dtype=float)
        fp = np.asarray(fbar(t, pts.x, pts.y + h, pts.z), dtype=float)
        fm = np.asarray(fbar(t, pts.x, pts.y - h, pts.z), dtype=float)
        gap = np.abs((fp - f0) - (f0 - fm))[:, 0] / h
        scale = 1.0 + np.abs(fp - fm)[:, 0] / (2 * h)
        r = gap / scale
        k = int(np.argmax(r))
        if r[k] > worst:
            worst, wit = float(r[k]), {"t": t, "x": pts.x[k], "y": pts.y[k], "z": pts.z[k]}
    ok = worst <= 1e-2
    return CheckResult(flag, "fbar differentiable in y (one-sided quotients agree)", SUPPORTED if ok else REFUTED,
                       worst, None if ok else wit)


# -- condition assembly -----------------------------------------------------------
def _xr(x, r) -> np.ndarray:
    """``1 + |x|^r`` with the convention ``|x|^0 = 1``."""
    return 1.0 + (_norm(x) ** r if r > 0 else np.ones(len(x)))


def _growth_x(C, r):
    def fn(t, x, y, z):
        return C * _xr(x, r)

    return fn


def _h_check(flag, coeffs, spec, pts, C, r, bounded: bool) -> CheckResult:
    name = "|h| <= C" if bounded else "|h| <= C(1+|x|^r)"

    def value(t, x, y, z):
        return _norm(coeffs.h(x))

    def bound(t, x, y, z):
        return np.full(len(x), C) if bounded else _growth_x(C, r)(t, x, y, z)

    return _bound_check(flag, name, value, bound, spec, pts, xonly=True)


def _g_check(flag, coeffs, spec, pts, C, r, linear_x: bool) -> CheckResult:
    # rho_r = 0 for r > 0; for r = 0 the sampled y box stands in for the bounded range of Y
    name = "|g| <= C(1+|x|+rho_r(|y|))" if linear_x else "|g| <= C(1+rho_r(|y|))"

    def value(t, x, y, z):
        return _norm(coeffs.g(t, x, y, z))

    def bound(t, x, y, z):
        return C * (1.0 + _norm(x)) if linear_x else np.full(len(x), C)

    res = _bound_check(flag, name, value, bound, spec, pts)
    if r == 0:
        res.note = "rho_0 declared-only; checked on the sampled y box"
    return res


def _checks_for(flag: str, coeffs: CoefficientSet, prof: ConditionProfile, spec: SampleSpec, pts: _Points):
    c = prof.constants
    C, r = c.C, c.r
    fbar = augmented_driver(coeffs)
    dims = coeffs.dims
    out: List[CheckResult] = []

    def b_bounded():
        return _bound_check(flag, "|b| <= C", lambda t, x, y, z: _norm(coeffs.b(t, x)),
                            lambda t, x, y, z: np.full(len(x), C), spec, pts, xonly=True)

    if flag == "F1":
        out.append(b_bounded())
        out.append(_lipschitz_blowup(flag, "sigma locally Lipschitz in x", coeffs.sigma, spec))
    elif flag == "F2":
        out.append(b_bounded())
        ok = dims.m == 1 and dims.n == 1
        out.append(CheckResult(flag, "m = n = 1", SUPPORTED if ok else REFUTED,
                               witness=None if ok else {"m": dims.m, "n": dims.n}))
        out.append(CheckResult(flag, "modulus theta of sigma", DECLARED, note="theta is not constructed"))
    elif flag == "F3":
        out.append(_constant_sigma(coeffs, spec))
        out.append(_kappa(coeffs, spec, c.kappa))
    elif flag in ("B1", "B3", "B4"):
        bounded_h = flag == "B3"
        out.append(_h_check(flag, coeffs, spec, pts, C, r, bounded_h))
        out.append(_continuity_yz(flag, fbar, spec, pts))
        if flag == "B1":
            out.append(_bound_check(
                flag, "|f| <= C(1+|x|^r+|y|+|z|)",
                lambda t, x, y, z: _norm(coeffs.f(t, x, y, z)),
                lambda t, x, y, z: C * (_xr(x, r) + _norm(y) + _norm(z)),
                spec, pts,
            ))
            out.append(_g_check(flag, coeffs, spec, pts, C, r, linear_x=False))
        elif flag == "B3":
            ok = dims.d == 1
            out.append(CheckResult(flag, "d = 1", SUPPORTED if ok else REFUTED))
            out.append(_bound_check(
                flag, "|f| <= C(1+|y|+|z|^2)",
                lambda t, x, y, z: _norm(coeffs.f(t, x, y, z)),
                lambda t, x, y, z: C * (1.0 + _norm(y) + _norm(z) ** 2),
                spec, pts,
            ))
            out.append(_g_check(flag, coeffs, spec, pts, C, r, linear_x=False))
        else:
            out.append(_bound_check(
                flag, "|f^i| <= C(1+|x|^r+|y^i|)",
                lambda t, x, y, z: np.max(np.abs(np.asarray(coeffs.f(t, x, y, z)))
                                          / (C * (_xr(x, r)[:, None] + np.abs(y))),
                                          axis=1),
                lambda t, x, y, z: np.ones(len(x)),
                spec, pts,
            ))
            out.append(_g_check(flag, coeffs, spec, pts, C, r, linear_x=True))
    elif flag == "B2":
        out.append(_h_check(flag, coeffs, spec, pts, C, r, bounded=True))
        out.append(_bound_check(
            flag, "|fbar| <= C(1+|y|+|z|^2) (implied by the splitting)",
            lambda t, x, y, z: _norm(fbar(t, x, y, z)),
            lambda t, x, y, z: C * (1.0 + _norm(y) + _norm(z) ** 2),
            spec, pts,
        ))
        out.append(_g_check(flag, coeffs, spec, pts, C, r, linear_x=False))
        out.append(CheckResult(flag, "splitting fbar = ftilde(z^i) + fhat", DECLARED,
                               note="the splitting is not observable from fbar alone"))
    elif flag == "U1":
        out.append(_shell_growth(flag, "fbar globally Lipschitz in (y, z)", lambda t, x, y, z: fbar(t, x, y, z), spec, 1.0))
        out.append(_continuity_yz(flag, fbar, spec, pts))
    elif flag == "U2":
        ok = dims.d == 1
        out.append(CheckResult(flag, "d = 1", SUPPORTED if ok else REFUTED))
        out.append(_h_check(flag, coeffs, spec, pts, C, r, bounded=True))
        if ok:
            out.append(_differentiable(flag, fbar, spec, pts))
            out.append(_shell_growth(flag, "|fbar| <= l_M + C_M |z|^2", fbar, spec, 2.0))
            out.append(_shell_growth(flag, "|d_z fbar| <= k_M + C_M |z|", _partial(fbar, "z"), spec, 1.0))
            # l_eps + eps |z|^2 for every eps: sub-quadratic growth of d_y fbar
            out.append(_shell_growth(flag, "|d_y fbar| <= l_eps + eps |z|^2", _partial(fbar, "y"), spec, 2.0))
    return out


def _benes_ratio(coeffs: CoefficientSet, n_paths: int = 256, steps: int = 50, seed: int = 0) -> float:
    """``sup_t |F_t| / (1 + |x0| + sup_t |W_t|)`` over a small ensemble with drift ``b``."""
    rng = np.random.default_rng(seed)
    n = coeffs.dims.n
    dt = coeffs.T / steps
    x = np.repeat(coeffs.x0[None], n_paths, 0)
    w = np.zeros((n_paths, n))
    supF = _norm(x)
    supW = np.zeros(n_paths)
    for i in range(steps):
        dw = rng.standard_normal((n_paths, n)) * np.sqrt(dt)
        t = i * dt
        x = x + np.asarray(coeffs.b(t, x)) * dt + np.einsum("pij,pj->pi", np.asarray(coeffs.sigma(t, x)), dw)
        w = w + dw
        supF = np.maximum(supF, _norm(x))
        supW = np.maximum(supW, _norm(w))
    return float(np.max(supF / (1.0 + float(np.linalg.norm(coeffs.x0)) + supW)))


def audit_conditions(
    coeffs: CoefficientSet, profile: Optional[ConditionProfile] = None, sample_spec: Optional[SampleSpec] = None
) -> AuditReport:
    """Sample every declared condition and tag it supported or refuted.

    Returns an :class:`AuditReport`; its ``profile`` is a copy of the input
    profile with ``declared_vs_verified`` filled in.

    Raises
    ------
    ValueError
        If ``sample_spec`` is missing or has an empty grid.
    """
    prof = profile if profile is not None else coeffs.profile
    if prof is None:
        prof = ConditionProfile()
    if sample_spec is None:
        raise ValueError("model_core: sample_spec is empty; pass SampleSpec.box(coeffs) for a default grid")
    spec = sample_spec
    dims = coeffs.dims
    if spec.x.ndim != 2 or spec.x.shape[1] != dims.m:
        raise ValueError(f"model_core: sample x points must have shape (K, {dims.m})")
    if spec.y.ndim != 2 or spec.y.shape[1] != dims.d or spec.z.shape[1:] != (dims.d, dims.n):
        raise ValueError("model_core: sample y/z points do not match the dimensions")
    pts = _Points(spec)

    checks: List[CheckResult] = []
    ell, tight = _ellipticity(coeffs, spec, prof.constants.epsilon)
    checks.append(ell)
    tags: Dict[str, str] = {"ellipticity": ell.status}
    for flag in prof.flags:
        res = _checks_for(flag, coeffs, prof, spec, pts)
        checks.extend(res)
        statuses = [c.status for c in res]
        if REFUTED in statuses:
            tags[flag] = REFUTED
        elif SUPPORTED in statuses:
            tags[flag] = SUPPORTED
        else:
            tags[flag] = DECLARED
    verified = {k: v for k, v in tags.items() if k != "ellipticity"}
    new_profile = dataclasses.replace(prof, declared_vs_verified=verified)
    return AuditReport(
        checks=checks,
        tags=tags,
        epsilon_tight=float(tight),
        benes_ratio=_benes_ratio(coeffs),
        profile=new_profile,
        n_points=pts.size,
    )


__all__ = ["SampleSpec", "CheckResult", "AuditReport", "audit_conditions", "SUPPORTED", "REFUTED", "DECLARED"]
