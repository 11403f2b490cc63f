"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names (:func:`counter_normals`, :func:`accumulate_cells`,
:func:`predict_cells`, :func:`solve_tridiagonal`) dispatch on :data:`fbsde_lab._accel.USE_NUMBA`.
The ``*_numpy`` and ``*_numba`` variants are exported for testing and for
``benchmarks/bench_kernels.py``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_banded

from ._accel import NUMBA_AVAILABLE, USE_NUMBA, njit

__all__ = [
    "stream_key",
    "counter_normals",
    "counter_normals_numpy",
    "counter_normals_numba",
    "accumulate_cells",
    "accumulate_cells_numpy",
    "accumulate_cells_numba",
    "predict_cells",
    "predict_cells_numpy",
    "predict_cells_numba",
    "solve_tridiagonal",
    "solve_tridiagonal_numpy",
    "solve_tridiagonal_numba",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_K_PATH = np.uint64(0xD1B54A32D192ED03)
_K_STEP = np.uint64(0xABC98388FB8FAC03)
_K_CHAN = np.uint64(0x8CB92BA72F3D8DD7)
_K_PAIR = np.uint64(0x5851F42D4C957F2D)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi


def _mix64(z):
    # splitmix64 finalizer; works on uint64 scalars and arrays
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_key(seed: int, stream: int = 0) -> int:
    """64-bit key for ``(seed, stream)``; ``stream`` separates independent uses."""
    s = np.uint64(int(seed) & _MASK64)
    with np.errstate(over="ignore"):
        k = _mix64(np.uint64(s * _GOLDEN) ^ np.uint64((int(stream) * 0x632BE59BD9B4E019 + 1) & _MASK64))
    return int(k)


# --------------------------------------------------------------------------
# counter-based normals: entry (p, i, j) is a pure function of (key, p, i, j)


def counter_normals_numpy(key: int, p0: int, n_paths: int, n_steps: int, n_chan: int) -> np.ndarray:
    """Standard normals for paths ``p0 .. p0+n_paths-1``; shape ``(n_paths, n_steps, n_chan)``."""
    k = np.uint64(key)
    p = np.arange(p0 + 1, p0 + n_paths + 1, dtype=np.uint64)
    i = np.arange(1, n_steps + 1, dtype=np.uint64)
    j = np.arange(1, n_chan + 1, dtype=np.uint64)
    a = _mix64(k ^ (p * _K_PATH))
    b = _mix64(a[:, None] ^ (i * _K_STEP)[None, :])
    c = _mix64(b[:, :, None] ^ (j * _K_CHAN)[None, None, :])
    d = _mix64(c ^ _K_PAIR)
    u1 = ((c >> _S11).astype(np.float64) + 0.5) * _INV53
    u2 = (d >> _S11).astype(np.float64) * _INV53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def _counter_normals_loop(key, p0, n_paths, n_steps, n_chan, out):
    k = np.uint64(key)
    for pp in range(n_paths):
        a = _mix64_jit(k ^ (np.uint64(p0 + pp + 1) * _K_PATH))
        for ii in range(n_steps):
            b = _mix64_jit(a ^ (np.uint64(ii + 1) * _K_STEP))
            for jj in range(n_chan):
                c = _mix64_jit(b ^ (np.uint64(jj + 1) * _K_CHAN))
                d = _mix64_jit(c ^ _K_PAIR)
                u1 = (np.float64(c >> _S11) + 0.5) * _INV53
                u2 = np.float64(d >> _S11) * _INV53
                out[pp, ii, jj] = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


_mix64_jit = njit(_mix64)
_counter_normals_jit = njit(_counter_normals_loop)


def counter_normals_numba(key: int, p0: int, n_paths: int, n_steps: int, n_chan: int) -> np.ndarray:
    out = np.empty((n_paths, n_steps, n_chan))
    _counter_normals_jit(np.uint64(key), p0, n_paths, n_steps, n_chan, out)
    return out


# --------------------------------------------------------------------------
# per-cell normal equations for binned regression bases


def accumulate_cells_numpy(cells: np.ndarray, feats: np.ndarray, targets: np.ndarray, n_cells: int):
    """Per-cell Gram matrices, cross moments and counts.

    Returns ``(G, B, counts)`` with ``G[c] = sum feats^T feats`` and
    ``B[c] = sum feats^T targets`` over rows with ``cells == c``.
    """
    q = feats.shape[1]
    r = targets.shape[1]
    G = np.empty((n_cells, q, q))
    B = np.empty((n_cells, q, r))
    for a in range(q):
        for b in range(a, q):
            col = np.bincount(cells, weights=feats[:, a] * feats[:, b], minlength=n_cells)
            G[:, a, b] = col
            G[:, b, a] = col
        for s in range(r):
            B[:, a, s] = np.bincount(cells, weights=feats[:, a] * targets[:, s], minlength=n_cells)
    counts = np.bincount(cells, minlength=n_cells)
    return G, B, counts


def _accumulate_cells_loop(cells, feats, targets, G, B, counts):
    n, q = feats.shape
    r = targets.shape[1]
    for k in range(n):
        c = cells[k]
        counts[c] += 1
        for a in range(q):
            fa = feats[k, a]
            for b in range(a, q):
                G[c, a, b] += fa * feats[k, b]
            for s in range(r):
                B[c, a, s] += fa * targets[k, s]
    for c in range(G.shape[0]):
        for a in range(q):
            for b in range(a + 1, q):
                G[c, b, a] = G[c, a, b]


_accumulate_cells_jit = njit(_accumulate_cells_loop)


def accumulate_cells_numba(cells: np.ndarray, feats: np.ndarray, targets: np.ndarray, n_cells: int):
    q = feats.shape[1]
    r = targets.shape[1]
    G = np.zeros((n_cells, q, q))
    B = np.zeros((n_cells, q, r))
    counts = np.zeros(n_cells, dtype=np.int64)
    _accumulate_cells_jit(
        np.ascontiguousarray(cells, dtype=np.int64),
        np.ascontiguousarray(feats, dtype=np.float64),
        np.ascontiguousarray(targets, dtype=np.float64),
        G,
        B,
        counts,
    )
    return G, B, counts


def predict_cells_numpy(cells: np.ndarray, feats: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Evaluate a binned fit: ``out[k] = sum_a feats[k, a] coef[cells[k], a]``."""
    c = coef[cells]
    out = feats[:, 0:1] * c[:, 0, :]
    for a in range(1, feats.shape[1]):
        out = out + feats[:, a : a + 1] * c[:, a, :]
    return out


def _predict_cells_loop(cells, feats, coef, out):
    n, q = feats.shape
    r = coef.shape[2]
    for k in range(n):
        c = cells[k]
        for s in range(r):
            acc = feats[k, 0] * coef[c, 0, s]
            for a in range(1, q):
                acc = acc + feats[k, a] * coef[c, a, s]
            out[k, s] = acc


_predict_cells_jit = njit(_predict_cells_loop)


def predict_cells_numba(cells: np.ndarray, feats: np.ndarray, coef: np.ndarray) -> np.ndarray:
    out = np.empty((feats.shape[0], coef.shape[2]))
    _predict_cells_jit(
        np.ascontiguousarray(cells, dtype=np.int64),
        np.ascontiguousarray(feats, dtype=np.float64),
        np.ascontiguousarray(coef, dtype=np.float64),
        out,
    )
    return out


# --------------------------------------------------------------------------
# tridiagonal systems (Thomas algorithm)


def solve_tridiagonal_numpy(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``T x = rhs`` with ``T`` given by its three diagonals.

    ``lower`` and ``upper`` have length ``len(diag) - 1``.
    """
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _thomas_loop(lower, diag, upper, rhs, out):
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0] if n > 1 else 0.0
    dp[0] = rhs[0] / diag[0]
    for k in range(1, n):
        den = diag[k] - lower[k - 1] * cp[k - 1]
        if k < n - 1:
            cp[k] = upper[k] / den
        dp[k] = (rhs[k] - lower[k - 1] * dp[k - 1]) / den
    out[n - 1] = dp[n - 1]
    for k in range(n - 2, -1, -1):
        out[k] = dp[k] - cp[k] * out[k + 1]


_thomas_jit = njit(_thomas_loop)


def solve_tridiagonal_numba(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    out = np.empty(diag.shape[0])
    _thomas_jit(
        np.ascontiguousarray(lower, dtype=np.float64),
        np.ascontiguousarray(diag, dtype=np.float64),
        np.ascontiguousarray(upper, dtype=np.float64),
        np.ascontiguousarray(rhs, dtype=np.float64),
        out,
    )
    return out


if USE_NUMBA:
    counter_normals = counter_normals_numba
    accumulate_cells = accumulate_cells_numba
    predict_cells = predict_cells_numba
    solve_tridiagonal = solve_tridiagonal_numba
else:
    counter_normals = counter_normals_numpy
    accumulate_cells = accumulate_cells_numpy
    predict_cells = predict_cells_numpy
    solve_tridiagonal = solve_tridiagonal_numpy

if not NUMBA_AVAILABLE:  # pragma: no cover
    counter_normals_numba = counter_normals_numpy
    accumulate_cells_numba = accumulate_cells_numpy
    predict_cells_numba = predict_cells_numpy
    solve_tridiagonal_numba = solve_tridiagonal_numpy
