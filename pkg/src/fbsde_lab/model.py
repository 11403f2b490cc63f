"""FBSDE coefficient sets, the augmented driver and the truncation operator.

Evaluator conventions (all vectorized over a leading batch axis ``P``):

* ``b(t, x)``: ``x`` of shape ``(P, m)`` -> ``(P, m)``
* ``sigma(t, x)``: ``(P, m)`` -> ``(P, m, n)``
* ``f(t, x, y, z)``: ``y`` of shape ``(P, d)``, ``z`` of shape ``(P, d, n)`` -> ``(P, d)``
* ``g(t, x, y, z)``: -> ``(P, n)``
* ``h(x)``: -> ``(P, d)``

``t`` is a Python float.  Evaluators must be pure (no mutable state) so that
several workers can call them concurrently.  Jump points use right-closed
indicators, i.e. ``1{e >= K}`` is 1 at ``e == K``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError

Evaluator = Callable[..., np.ndarray]

FORWARD_CONDITIONS = ("F1", "F2", "F3", "none")
BACKWARD_CONDITIONS = ("B1", "B2", "B3", "B4", "none")
UNIQUENESS_CONDITIONS = ("U1", "U2", "B2", "none")
VERIFICATION_TAGS = ("declared", "numerically-supported", "numerically-refuted")


@dataclass(frozen=True)
class Dimensions:
    m: int
    n: int
    d: int

    def __post_init__(self):
        for name in ("m", "n", "d"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DimensionError(f"model_core: dimension {name} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class GrowthConstants:
    """Constants shared by the condition catalogue.

    ``C`` bounds growth, ``r`` is the polynomial exponent in ``x``,
    ``epsilon`` the ellipticity constant and ``kappa`` the drift modulus bound.
    """

    C: float = 1.0
    r: float = 0.0
    epsilon: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("model_core: epsilon must be positive")
        if not self.kappa > 0:
            raise ValueError("model_core: kappa must be positive")
        if self.C < 0 or self.r < 0:
            raise ValueError("model_core: C and r must be nonnegative")


@dataclass(frozen=True)
class ConditionProfile:
    forward_condition: str = "none"
    backward_condition: str = "none"
    uniqueness_condition: str = "none"
    constants: GrowthConstants = field(default_factory=GrowthConstants)
    declared_vs_verified: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.forward_condition not in FORWARD_CONDITIONS:
            raise ValueError(f"model_core: unknown forward condition {self.forward_condition!r}")
        if self.backward_condition not in BACKWARD_CONDITIONS:
            raise ValueError(f"model_core: unknown backward condition {self.backward_condition!r}")
        if self.uniqueness_condition not in UNIQUENESS_CONDITIONS:
            raise ValueError(f"model_core: unknown uniqueness condition {self.uniqueness_condition!r}")
        for tag in self.declared_vs_verified.values():
            if tag not in VERIFICATION_TAGS:
                raise ValueError(f"model_core: unknown verification tag {tag!r}")

    @property
    def flags(self) -> tuple[str, ...]:
        out = []
        for c in (self.forward_condition, self.backward_condition, self.uniqueness_condition):
            if c != "none" and c not in out:
                out.append(c)
        return tuple(out)

    def check_dims(self, dims: Dimensions) -> None:
        if (self.backward_condition == "B3" or self.uniqueness_condition == "U2") and dims.d != 1:
            raise DimensionError("model_core: conditions B3 and U2 require d = 1")


@dataclass(frozen=True)
class CoefficientSet:
    dims: Dimensions
    b: Evaluator
    sigma: Evaluator
    f: Evaluator
    g: Evaluator
    h: Evaluator
    T: float
    x0: np.ndarray
    profile: Optional[ConditionProfile] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"model_core: horizon T must be positive, got {self.T!r}")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape != (self.dims.m,):
            raise DimensionError(f"model_core: x0 has shape {x0.shape}, expected ({self.dims.m},)")
        object.__setattr__(self, "x0", x0)
        if self.profile is not None:
            self.profile.check_dims(self.dims)

    def replace(self, **changes) -> "CoefficientSet":
        return dataclasses.replace(self, **changes)

    def check_shapes(self, n_probe: int = 3) -> None:
        """Evaluate every coefficient at ``x0`` and verify output shapes."""
        m, n, d = self.dims.m, self.dims.n, self.dims.d
        x = np.repeat(self.x0[None, :], n_probe, axis=0)
        y = np.zeros((n_probe, d))
        z = np.zeros((n_probe, d, n))
        expected = {
            "b": (self.b(0.0, x), (n_probe, m)),
            "sigma": (self.sigma(0.0, x), (n_probe, m, n)),
            "f": (self.f(0.0, x, y, z), (n_probe, d)),
            "g": (self.g(0.0, x, y, z), (n_probe, n)),
            "h": (self.h(x), (n_probe, d)),
        }
        for name, (val, shape) in expected.items():
            if np.shape(val) != shape:
                raise DimensionError(f"model_core: {name} returned shape {np.shape(val)}, expected {shape}")


def augmented_driver(coeffs: CoefficientSet) -> Evaluator:
    """The decoupled driver ``fbar(t, x, y, z) = f(t, x, y, z) + z g(t, x, y, z)``."""
    f, g = coeffs.f, coeffs.g

    def fbar(t, x, y, z):
        gv = np.asarray(g(t, x, y, z))
        if gv.shape[-1] != z.shape[-1] or gv.shape[0] != z.shape[0]:
            raise DimensionError(
                f"model_core: z has shape {z.shape} but g returned {gv.shape}; cannot form z @ g"
            )
        return f(t, x, y, z) + np.einsum("pij,pj->pi", z, gv)

    return fbar


def project_ball(y: np.ndarray, N: float) -> np.ndarray:
    """Radial projection ``N y / max(|y|, N)`` applied row-wise."""
    norm = np.sqrt(np.sum(y * y, axis=-1, keepdims=True))
    # the slack keeps the map idempotent under rounding of the rescaled norm
    inside = norm <= N * (1.0 + 8.0 * np.finfo(float).eps)
    scale = N / np.maximum(norm, N)
    return np.where(inside, y, y * scale)


def truncate_coefficients(coeffs: CoefficientSet, N: float) -> CoefficientSet:
    """Replace ``y`` by its projection onto the ball of radius ``N`` inside ``f`` and ``g``."""
    if not N > 0:
        raise ValueError(f"model_core: truncation radius must be positive, got {N!r}")
    f, g = coeffs.f, coeffs.g

    def f_N(t, x, y, z):
        return f(t, x, project_ball(y, N), z)

    def g_N(t, x, y, z):
        return g(t, x, project_ball(y, N), z)

    return coeffs.replace(f=f_N, g=g_N)


def y_bound(C: float, T: float) -> float:
    """A-priori bound ``exp(C (C + 1) T) sqrt(C^2 + T)`` on ``|Y|`` for r = 0 problems."""
    if C < 0:
        raise ValueError("model_core: C must be nonnegative")
    if not T > 0:
        raise ValueError("model_core: T must be positive")
    a = 2.0 * C * (C + 1.0)
    return math.exp(0.5 * a * T) * math.sqrt(C * C + T)
