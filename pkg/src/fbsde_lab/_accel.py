"""Numba switch.

Kernels are compiled with numba unless ``FBSDE_LAB_DISABLE_NUMBA`` is set to a
truthy value (``1``, ``true``, ``yes``), in which case the dispatching entry
points in :mod:`fbsde_lab.kernels` run their pure-numpy implementations.  The
flag is read once at import time.  Both implementations stay importable either
way so they can be benchmarked against each other.
"""
from __future__ import annotations

import os

ENV_FLAG = "FBSDE_LAB_DISABLE_NUMBA"

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get(ENV_FLAG, "").strip().lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def njit(fn):
    """Compile ``fn`` in nopython mode; returns ``fn`` unchanged without numba."""
    if _numba is None:
        return fn
    return _numba.njit(cache=True, nogil=True)(fn)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
