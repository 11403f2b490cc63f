"""Optimal intervention against an epidemic with convex, kinked costs.

The log-infection level follows ``dX = (theta(X) - alpha) dt + sigma dW`` and
the policymaker minimizes ``J(alpha) = E int_0^T alpha^2 + q(X) dt``.  The
optimal policy is ``alpha* = max(Y, 0) / 2`` where ``(X, Y, Z)`` solves

    dX = (theta(X) - phi(Y) / 2) dt + sigma dW
    dY = -(q'_+(X) + theta'_+(X) phi(Y)) dt + Z dW,   Y_T = 0,

with ``phi`` a smooth cutoff that equals the identity on ``[0, C_y]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Union

import numpy as np

from ..bsde import PicardConfig
from ..model import CoefficientSet, ConditionProfile, Dimensions, GrowthConstants
from ..paths import NoiseBlock, TimeGrid
from ..pipeline import FbsdeSolution, solve_fbsde
from ..regression import BasisSpec

ScalarMap = Callable[[np.ndarray], np.ndarray]


def smoothstep(s: np.ndarray) -> np.ndarray:
    """Cubic ``3 s^2 - 2 s^3`` on ``[0, 1]``, clamped outside."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def cutoff(y: np.ndarray, C_y: float) -> np.ndarray:
    """C^1 cutoff: identity on ``[0, C_y]``, zero outside ``(-1, C_y + 1)``, ``|phi(y)| <= |y|``."""
    if not C_y > 0:
        raise ValueError(f"applications: C_y must be positive, got {C_y!r}")
    y = np.asarray(y, dtype=float)
    out = np.where((y >= 0.0) & (y <= C_y), y, 0.0)
    left = (y > -1.0) & (y < 0.0)
    right = (y > C_y) & (y < C_y + 1.0)
    out = np.where(left, y * smoothstep(y + 1.0), out)
    out = np.where(right, y * smoothstep(C_y + 1.0 - y), out)
    return out


@dataclass(frozen=True)
class PandemicModel:
    """Growth exponent ``theta`` and infection cost ``q`` (both convex and
    Lipschitz, ``q`` nondecreasing) with their right derivatives."""

    theta: ScalarMap
    dtheta_plus: ScalarMap
    q: ScalarMap
    dq_plus: ScalarMap
    sigma: float
    T: float
    x0: float
    C_y: Optional[float] = None
    sample_range: float = 10.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("applications: pandemic sigma must be positive")
        if not self.T > 0:
            raise ValueError("applications: pandemic T must be positive")
        xs = self.sample_points()
        if np.any(np.asarray(self.dq_plus(xs)) < 0):
            raise ValueError("applications: dq_plus must be nonnegative")
        if self.C_y is not None:
            if not self.C_y > 0:
                raise ValueError("applications: C_y must be positive")
            # tolerance for rounding in exp(CT) - 1 when C_y is passed back in
            if self.C_y < self.default_C_y() * (1.0 - 1e-12):
                raise ValueError(
                    f"applications: C_y={self.C_y} is below the a-priori bound exp(C T) - 1 = {self.default_C_y()}"
                )

    def sample_points(self, n: int = 4001) -> np.ndarray:
        return np.linspace(self.x0 - self.sample_range, self.x0 + self.sample_range, n)

    @property
    def lipschitz(self) -> float:
        """``C = max(sup |theta'_+|, sup q'_+, 1)`` over the sample range."""
        xs = self.sample_points()
        return float(max(np.max(np.abs(self.dtheta_plus(xs))), np.max(self.dq_plus(xs)), 1.0))

    def default_C_y(self) -> float:
        return math.expm1(self.lipschitz * self.T)

    @property
    def cap(self) -> float:
        return self.default_C_y() if self.C_y is None else float(self.C_y)

    def y_upper(self, t) -> np.ndarray:
        """Comparison bound ``exp(C (T - t)) - 1`` on ``Y_t``."""
        return np.expm1(self.lipschitz * (self.T - np.asarray(t, dtype=float)))


def benchmark_model(**overrides) -> PandemicModel:
    """``theta = 0.3 + 0.1 |x|``, ``q = max(x - 1, 0)``, ``sigma = 0.3``, ``T = 1``, ``x0 = 0``."""
    params = dict(
        theta=lambda x: 0.3 + 0.1 * np.abs(x),
        dtheta_plus=lambda x: np.where(x >= 0.0, 0.1, -0.1),
        q=lambda x: np.maximum(x - 1.0, 0.0),
        dq_plus=lambda x: np.where(x >= 1.0, 1.0, 0.0),
        sigma=0.3,
        T=1.0,
        x0=0.0,
    )
    params.update(overrides)
    return PandemicModel(**params)


def pandemic_coefficients(model: PandemicModel) -> CoefficientSet:
    C_y = model.cap
    if not C_y > 0:
        raise ValueError("applications: C_y must be positive")
    theta, dth, dq, sig = model.theta, model.dtheta_plus, model.dq_plus, float(model.sigma)

    def b(t, x):
        return theta(x[:, 0])[:, None]

    def sigma(t, x):
        return np.full((x.shape[0], 1, 1), sig)

    def g(t, x, y, z):
        return -0.5 * cutoff(y[:, 0:1], C_y)

    def f(t, x, y, z):
        return (dq(x[:, 0]) + dth(x[:, 0]) * cutoff(y[:, 0], C_y))[:, None]

    def h(x):
        return np.zeros((x.shape[0], 1))

    C = model.lipschitz
    # f is bounded by C (1 + |y|); g by (C_y + 1) / 2
    C_audit = max(C, 0.5 * (C_y + 1.0))
    eps = max(sig * sig, 1.0 / (sig * sig))
    profile = ConditionProfile(
        forward_condition="F3",
        backward_condition="B4",
        uniqueness_condition="U2",
        constants=GrowthConstants(C=C_audit, r=0.0, epsilon=eps, kappa=_kappa(theta, model)),
    )
    return CoefficientSet(
        dims=Dimensions(1, 1, 1), b=b, sigma=sigma, f=f, g=g, h=h, T=model.T, x0=[model.x0], profile=profile,
        name="pandemic",
    )


def _kappa(theta, model: PandemicModel) -> float:
    xs = model.sample_points()
    th = theta(xs)
    step = xs[1] - xs[0]
    k = max(1, int(round(1.0 / step)))
    osc = np.max(np.abs(th[k:] - th[:-k])) if k < xs.size else 0.0
    return float(abs(theta(np.zeros(1))[0]) + osc) * 1.5 + 1e-12


def optimal_policy(sol: Union[FbsdeSolution, np.ndarray]) -> np.ndarray:
    """``alpha*[p, i] = max(Y[p, i], 0) / 2``."""
    Y = sol.Y if isinstance(sol, FbsdeSolution) else np.asarray(sol, dtype=float)
    if Y.ndim == 3:
        Y = Y[:, :, 0]
    return np.maximum(Y, 0.0) / 2.0


@dataclass(frozen=True)
class CostEstimate:
    J: float
    stderr: float
    per_path: np.ndarray


Policy = Union[np.ndarray, float, Callable[[float, np.ndarray], np.ndarray]]


def evaluate_policy_cost(model: PandemicModel, alpha: Policy, noise: NoiseBlock, grid: TimeGrid) -> CostEstimate:
    """Monte Carlo cost of a policy on the given noise.

    ``alpha`` is a constant, an array of adapted values ``(P, M)`` or
    ``(P, M + 1)`` (only the first ``M`` columns are used), or a feedback rule
    ``alpha(t, x) -> (P,)`` evaluated on the current state.  The running cost
    is integrated with a left Riemann sum.
    """
    incr = noise.increments[:, :, 0]
    P, M = incr.shape
    if M != grid.M:
        raise ValueError("applications: noise and grid disagree on the number of steps")
    dt = grid.dt
    x = np.full(P, float(model.x0))
    cost = np.zeros(P)
    table = None
    if not callable(alpha):
        table = np.broadcast_to(np.asarray(alpha, dtype=float), (P, M)) if np.ndim(alpha) == 0 else np.asarray(alpha)
        if table.shape[0] != P or table.shape[1] < M:
            raise ValueError(f"applications: policy array has shape {table.shape}, expected ({P}, {M})")
    for i in range(M):
        t = grid.time(i)
        a = np.asarray(alpha(t, x), dtype=float) if table is None else table[:, i]
        cost += (a * a + model.q(x)) * dt
        x = x + (model.theta(x) - a) * dt + model.sigma * incr[:, i]
    se = float(np.std(cost, ddof=1) / math.sqrt(P)) if P > 1 else 0.0
    return CostEstimate(J=float(np.mean(cost)), stderr=se, per_path=cost)


def compare_policies(
    model: PandemicModel,
    policies: Mapping[str, Policy],
    noise: NoiseBlock,
    grid: TimeGrid,
    reference: str = "alpha*",
) -> Dict[str, dict]:
    """Costs of several policies on common random numbers.

    Each entry reports ``J``, its standard error, and the mean and standard
    error of the path-wise difference ``J(reference) - J(policy)``.
    """
    est = {name: evaluate_policy_cost(model, a, noise, grid) for name, a in policies.items()}
    ref = est[reference].per_path
    out = {}
    for name, e in est.items():
        diff = ref - e.per_path
        se = float(np.std(diff, ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0
        out[name] = {"J": e.J, "stderr": e.stderr, "diff": float(np.mean(diff)), "diff_stderr": se}
    return out


def comparison_suite(alpha_star: np.ndarray) -> Dict[str, Policy]:
    return {
        "alpha*": alpha_star,
        "zero": 0.0,
        "const_0.25": 0.25,
        "const_0.5": 0.5,
        "1.5*alpha*": 1.5 * alpha_star,
        "0.5*alpha*": 0.5 * alpha_star,
    }


# Bin averages never leave the range of their targets, so the discrete backward
# step keeps the comparison bound 0 <= Y_t <= exp(C (T - t)) - 1.  Local-linear
# bins overshoot at the kink of q' and break it by several percent.
PANDEMIC_BASIS = BasisSpec("piecewise-constant-bins", 50)


def solve_pandemic(
    model: PandemicModel,
    grid: TimeGrid,
    n_paths: int,
    seed: int = 0,
    basis: Optional[BasisSpec] = None,
    cfg: PicardConfig = PicardConfig(),
    workers: int = 1,
) -> FbsdeSolution:
    """Solve the adjoint FBSDE; ``basis`` defaults to :data:`PANDEMIC_BASIS`."""
    if basis is None:
        basis = PANDEMIC_BASIS
    return solve_fbsde(pandemic_coefficients(model), grid, n_paths, seed, basis, cfg, workers=workers)
