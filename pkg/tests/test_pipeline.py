import numpy as np
import pytest

from fbsde_lab.bsde import PicardConfig
from fbsde_lab.model import ConditionProfile, GrowthConstants, y_bound
from fbsde_lab.paths import TimeGrid
from fbsde_lab.pipeline import coupling_residual, solve_decoupled_only, solve_fbsde
from fbsde_lab.reference import riccati_benchmark

from conftest import scalar_problem


def test_vacuous_coupling_is_bitwise_decoupled():
    c = scalar_problem(f=lambda t, x, y, z: np.cos(x) - 0.2 * y, h=lambda x: np.tanh(x), x0=0.2)
    grid = TimeGrid(1.0, 20)
    sol = solve_fbsde(c, grid, 20_000, seed=3)
    F, fld = solve_decoupled_only(c, grid, 20_000, seed=3)
    assert sol.X.states.tobytes() == F.states.tobytes()
    assert sol.Y.tobytes() == fld.u_train.tobytes()
    assert sol.Z.tobytes() == fld.z_train.tobytes()


def test_y_is_field_along_x():
    c = riccati_benchmark()
    grid = TimeGrid(1.0, 10)
    sol = solve_fbsde(c, grid, 10_000, seed=1)
    for i in (0, 4, 10):
        np.testing.assert_array_equal(sol.Y[:, i], sol.field.u_at(i, sol.X.states[:, i]))
    assert sol.diagnostics.y_sup == np.max(np.abs(sol.Y))


def test_seed_determinism():
    c = riccati_benchmark()
    grid = TimeGrid(1.0, 10)
    a = solve_fbsde(c, grid, 5000, seed=9)
    b = solve_fbsde(c, grid, 5000, seed=9)
    assert a.Y.tobytes() == b.Y.tobytes() and a.X.states.tobytes() == b.X.states.tobytes()
    assert a.Y0 == b.Y0


def test_worker_independence():
    c = riccati_benchmark()
    grid = TimeGrid(1.0, 10)
    a = solve_fbsde(c, grid, 40_000, seed=2, workers=1)
    b = solve_fbsde(c, grid, 40_000, seed=2, workers=3)
    assert a.Y.tobytes() == b.Y.tobytes() and a.Z.tobytes() == b.Z.tobytes()


def test_recoupling_identity_in_solver():
    sol = solve_fbsde(riccati_benchmark(), TimeGrid(1.0, 20), 20_000)
    assert sol.diagnostics.recoupling_error <= 1e-12


def test_constant_terminal_has_no_mismatch():
    c = scalar_problem(h=lambda x: np.full((x.shape[0], 1), 1.25))
    sol = solve_fbsde(c, TimeGrid(1.0, 10), 5000)
    assert coupling_residual(sol, c)["terminal_rms"] <= 1e-10


def test_linear_residual_within_noise_floor():
    grid = TimeGrid(1.0, 50)
    base = scalar_problem(x0=1.0)
    floor = solve_fbsde(base, grid, 100_000).diagnostics.coupling_residual_rms
    lin = scalar_problem(f=lambda t, x, y, z: -0.1 * y, x0=1.0)
    res = solve_fbsde(lin, grid, 100_000).diagnostics.coupling_residual_rms
    assert res <= 5 * floor


def test_riccati_terminal_rms():
    sol = solve_fbsde(riccati_benchmark(), TimeGrid(1.0, 50), 200_000)
    assert sol.diagnostics.terminal_rms <= 0.05


def test_bounded_coupling_respects_truncation():
    prof = ConditionProfile("F1", "B1", "none", GrowthConstants(C=0.5, r=0.0))
    # |h| <= C (1 + |x|^0) = 1 as declared
    c = scalar_problem(g=lambda t, x, y, z: -y, h=lambda x: 1.0 * (x >= 0), profile=prof)
    sol = solve_fbsde(c, TimeGrid(1.0, 20), 20_000)
    yb = y_bound(0.5, 1.0)
    assert sol.field.truncation_N == pytest.approx(yb)
    assert sol.diagnostics.y_bound == pytest.approx(yb)
    assert sol.diagnostics.y_sup <= yb + 0.01
    assert sol.diagnostics.martingale.passed


def test_non_converged_solution_is_returned():
    c = riccati_benchmark()
    sol = solve_fbsde(c, TimeGrid(1.0, 10), 5000, cfg=PicardConfig(max_iters=1))
    assert sol.diagnostics.converged is False
    assert np.isfinite(sol.Y0)
