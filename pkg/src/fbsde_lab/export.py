"""Tabular views of paths, decoupling fields and PDE solutions.

Each function returns ``(header, rows)`` ready for :func:`fbsde_lab.cli.write_csv`.
"""
from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bsde import DecouplingField
from .paths import PathEnsemble
from .pde import PdeSolution

Table = Tuple[List[str], List[list]]


def path_table(paths: PathEnsemble, n_paths: Optional[int] = None) -> Table:
    """Columns ``path, step, time, x_1 .. x_m`` for the first ``n_paths`` paths."""
    X = paths.states
    P = X.shape[0] if n_paths is None else min(int(n_paths), X.shape[0])
    times = paths.grid.nodes
    header = ["path", "step", "time"] + [f"x_{j + 1}" for j in range(X.shape[2])]
    rows = [[p, i, times[i]] + list(X[p, i]) for p in range(P) for i in range(X.shape[1])]
    return header, rows


def default_field_nodes(field: DecouplingField, k: int = 41) -> np.ndarray:
    """``k`` nodes spanning the initial slice's training box (one-dimensional states only)."""
    des = field.u_models[0].design
    if des.m != 1:
        raise ValueError("cli: default field nodes exist only for m = 1; set export.field_x")
    lo, hi = float(des.lo[0]), float(des.hi[0])
    if hi <= lo:  # point mass at t = 0: use the last slice's box
        des = field.u_models[-1].design
        lo, hi = float(des.lo[0]), float(des.hi[0])
    return np.linspace(lo, hi, k)[:, None]


def field_table(field: DecouplingField, nodes: Sequence) -> Table:
    """Columns ``time, x_1..x_m, u_1..u_d, d_11..d_dn`` on every time slice.

    ``d`` at ``t_M`` repeats the last fitted slice.
    """
    x = np.asarray(nodes, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m, d, n = x.shape[1], field.d_dim, field.n_dim
    header = (["time"] + [f"x_{j + 1}" for j in range(m)] + [f"u_{k + 1}" for k in range(d)]
              + [f"d_{k + 1}{j + 1}" for k in range(d) for j in range(n)])
    rows = []
    for i, t in enumerate(field.grid.nodes):
        u = field.u_at(i, x)
        z = field.d_at(i, x).reshape(len(x), d * n)
        rows += [[t] + list(x[r]) + list(u[r]) + list(z[r]) for r in range(len(x))]
    return header, rows


def pde_table(pde: PdeSolution) -> Table:
    """Columns ``time, x, u`` over every time level and node."""
    x = pde.nodes
    rows = [[t, xx, v] for t, vals in zip(pde.tgrid.nodes, pde.values) for xx, v in zip(x, vals)]
    return ["time", "x", "u"], rows


__all__ = ["default_field_nodes", "field_table", "path_table", "pde_table"]
