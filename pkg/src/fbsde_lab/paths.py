"""Time grids, reproducible Brownian increments and Euler-Maruyama simulation."""
from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .errors import DimensionError, SimulationError
from .parallel import map_blocks

# stream ids fed to kernels.stream_key; keep distinct per use
NOISE_STREAM = 0
START_STREAM = 1


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0 = t_0 < ... < t_M = T``."""

    T: float
    M: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"path_engine: T must be positive, got {self.T!r}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"path_engine: M must be a positive integer, got {self.M!r}")

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.M + 1) * self.dt
        t[-1] = self.T
        return t

    def time(self, i: int) -> float:
        return self.T if i == self.M else i * self.dt

    def index(self, t: float) -> int:
        """Node index of time ``t``; ``t`` must sit on the grid."""
        i = int(round(t / self.dt))
        if i < 0 or i > self.M or abs(i * self.dt - t) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"path_engine: time {t!r} is not a grid node")
        return i


@dataclass
class NoiseBlock:
    seed: int
    n_paths: int
    grid: TimeGrid
    increments: np.ndarray  # (n_paths, M, n), entries ~ N(0, dt)

    @property
    def n(self) -> int:
        return self.increments.shape[2]


@dataclass
class PathEnsemble:
    grid: TimeGrid
    states: np.ndarray  # (n_paths, M + 1, m)
    increments: np.ndarray  # (n_paths, M, n) increments actually used
    noise: Optional[NoiseBlock] = None
    drift_tag: str = "b"

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def m(self) -> int:
        return self.states.shape[2]


def sample_noise(grid: TimeGrid, n_paths: int, n: int, seed: int = 0, workers: int = 1) -> NoiseBlock:
    """Brownian increments from a counter-based generator.

    Entry ``(p, i, j)`` depends only on ``(seed, p, i, j)``, so any split of the
    paths over workers gives identical bytes.
    """
    if n_paths < 1:
        raise ValueError(f"path_engine: n_paths must be >= 1, got {n_paths}")
    if n < 1:
        raise ValueError(f"path_engine: noise dimension must be >= 1, got {n}")
    total = int(n_paths) * int(grid.M) * int(n)
    if total * 8 > sys.maxsize:
        raise OverflowError(f"path_engine: {n_paths} x {grid.M} x {n} increments exceed addressable size")
    key = kernels.stream_key(seed, NOISE_STREAM)
    sd = np.sqrt(grid.dt)
    out = np.empty((n_paths, grid.M, n))

    def work(a, b):
        out[a:b] = kernels.counter_normals(key, a, b - a, grid.M, n) * sd

    map_blocks(work, n_paths, workers)
    return NoiseBlock(seed=int(seed), n_paths=int(n_paths), grid=grid, increments=out)


def dispersed_start(x0, n_paths: int, spread: float, seed: int = 0) -> np.ndarray:
    """Initial states ``x0 + spread * N(0, I)``, keyed like the noise but on its own stream."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if spread == 0:
        return np.repeat(x0[None, :], n_paths, axis=0)
    key = kernels.stream_key(seed, START_STREAM)
    xi = kernels.counter_normals(key, 0, n_paths, 1, x0.size)[:, 0, :]
    return x0[None, :] + spread * xi


def simulate_sde(
    drift: Callable,
    sigma: Callable,
    x0,
    noise: Union[NoiseBlock, np.ndarray],
    grid: TimeGrid,
    workers: int = 1,
    drift_tag: str = "b",
) -> PathEnsemble:
    """Explicit Euler-Maruyama with coefficients frozen at the left endpoint.

    ``x0`` is either one start point of shape ``(m,)`` or per-path starts of
    shape ``(n_paths, m)``.  ``noise`` is a :class:`NoiseBlock` or a raw
    increment array ``(n_paths, M, n)`` (e.g. measure-shifted increments).
    """
    incr = noise.increments if isinstance(noise, NoiseBlock) else np.asarray(noise, dtype=float)
    if incr.ndim != 3 or incr.shape[1] != grid.M:
        raise DimensionError(f"path_engine: increments have shape {incr.shape}, expected (P, {grid.M}, n)")
    P, M, n = incr.shape
    x0 = np.asarray(x0, dtype=float)
    starts = np.repeat(x0.reshape(1, -1), P, axis=0) if x0.ndim <= 1 else x0
    if starts.shape[0] != P:
        raise DimensionError(f"path_engine: {starts.shape[0]} start points for {P} paths")
    m = starts.shape[1]
    states = np.empty((P, M + 1, m))
    states[:, 0] = starts
    dt = grid.dt
    times = grid.nodes

    def work(a, b):
        for i in range(M):
            x = states[a:b, i]
            t = float(times[i])
            mu = np.asarray(drift(t, x))
            s = np.asarray(sigma(t, x))
            if mu.shape != x.shape or s.shape != (b - a, m, n):
                raise DimensionError(
                    f"path_engine: drift shape {mu.shape} / sigma shape {s.shape} inconsistent with m={m}, n={n}"
                )
            nxt = x + mu * dt + np.einsum("pij,pj->pi", s, incr[a:b, i])
            bad = ~np.isfinite(nxt)
            if bad.any():
                p = int(np.argmax(bad.any(axis=1)))
                raise SimulationError(
                    f"path_engine: non-finite state on path {a + p} at step {i + 1}", path=a + p, step=i + 1
                )
            states[a:b, i + 1] = nxt

    map_blocks(work, P, workers)
    return PathEnsemble(
        grid=grid,
        states=states,
        increments=incr,
        noise=noise if isinstance(noise, NoiseBlock) else None,
        drift_tag=drift_tag,
    )
