"""Stochastic exponentials and Brownian measure shifts on a discrete grid."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionError, NumericalError
from .paths import NoiseBlock, TimeGrid

LOG_GUARD = 700.0
MAX_LOG_PASS = 20.0


@dataclass
class ExponentialProcess:
    values: np.ndarray  # (n_paths, M + 1)
    log_values: np.ndarray
    generator_tag: str = "g"


@dataclass(frozen=True)
class MartingaleReport:
    terminal_mean: float
    stderr: float
    max_log: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "terminal_mean": self.terminal_mean,
            "stderr": self.stderr,
            "max_log": self.max_log,
            "pass": self.passed,
        }


def _increments(noise) -> np.ndarray:
    return noise.increments if isinstance(noise, NoiseBlock) else np.asarray(noise, dtype=float)


def _check(g_values, incr, grid):
    g_values = np.asarray(g_values, dtype=float)
    if g_values.ndim == 2:
        g_values = g_values[:, :, None]
    if g_values.shape != incr.shape:
        raise DimensionError(f"girsanov: g_values shape {g_values.shape} does not match increments {incr.shape}")
    if incr.shape[1] != grid.M:
        raise DimensionError(f"girsanov: increments have {incr.shape[1]} steps, grid has {grid.M}")
    return g_values


def stochastic_exponential(
    g_values: np.ndarray,
    noise: Union[NoiseBlock, np.ndarray],
    grid: TimeGrid,
    generator_tag: str = "g",
) -> ExponentialProcess:
    """Left-point discretization of ``exp(int g dW - 1/2 int |g|^2 dt)``.

    Raises
    ------
    NumericalError
        If any log-value exceeds 700 in magnitude; the message names the
        first offending path and step.
    """
    incr = _increments(noise)
    g = _check(g_values, incr, grid)
    step = np.sum(g * incr, axis=2) - 0.5 * np.sum(g * g, axis=2) * grid.dt
    logs = np.zeros((incr.shape[0], grid.M + 1))
    np.cumsum(step, axis=1, out=logs[:, 1:])
    bad = ~(np.abs(logs) <= LOG_GUARD)
    if bad.any():
        p, i = np.unravel_index(int(np.argmax(bad)), bad.shape)
        raise NumericalError(f"girsanov: log stochastic exponential overflow on path {p} at step {i}")
    return ExponentialProcess(values=np.exp(logs), log_values=logs, generator_tag=generator_tag)


def shift_noise(
    noise: Union[NoiseBlock, np.ndarray],
    g_values: np.ndarray,
    grid: TimeGrid,
    sign: int = 1,
) -> np.ndarray:
    """Shifted increments ``dW - sign * g dt``.

    ``sign=+1`` gives the increments of ``B = W - int g ds``; ``sign=-1``
    undoes it.
    """
    if sign not in (1, -1):
        raise ValueError("girsanov: sign must be +1 or -1")
    incr = _increments(noise)
    g = _check(g_values, incr, grid)
    drift = g * grid.dt
    return incr - drift if sign == 1 else incr + drift


def martingale_diagnostic(ep: ExponentialProcess) -> MartingaleReport:
    """Terminal-mean test of ``E[E_T] = 1`` plus a log-size proxy for uniform integrability."""
    ET = ep.values[:, -1]
    P = ET.size
    mean = float(np.mean(ET))
    se = float(np.std(ET, ddof=1) / np.sqrt(P)) if P > 1 else 0.0
    # only large positive values threaten uniform integrability; E_T near 0 is harmless
    max_log = float(np.max(ep.log_values))
    passed = abs(mean - 1.0) <= 3.0 * se and max_log <= MAX_LOG_PASS
    return MartingaleReport(terminal_mean=mean, stderr=se, max_log=max_log, passed=passed)
