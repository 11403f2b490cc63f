import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbsde_lab.applications import (
    CarbonModel,
    abatement_multiplier,
    aggregate_abatement,
    benchmark_model,
    carbon_coefficients,
    cutoff,
    evaluate_policy_cost,
    optimal_policy,
    pandemic_coefficients,
    price_allowance,
    solve_pandemic,
)
from fbsde_lab.paths import TimeGrid, sample_noise

ZERO = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731


# -- pandemic ---------------------------------------------------------------


def test_cutoff_identity_inside():
    C_y = 1.7
    assert cutoff(np.array([0.5 * C_y]), C_y)[0] == 0.5 * C_y


def test_cutoff_vanishes_outside():
    C_y = 1.7
    np.testing.assert_array_equal(cutoff(np.array([-2.0, C_y + 2.0, -1.0, C_y + 1.0]), C_y), 0.0)


@given(st.floats(-5.0, 8.0), st.floats(0.1, 4.0))
def test_cutoff_dominated_by_identity(y, C_y):
    assert abs(cutoff(np.array([y]), C_y)[0]) <= abs(y)


def test_cutoff_rejects_nonpositive_cap():
    with pytest.raises(ValueError):
        cutoff(np.zeros(3), 0.0)


def test_pandemic_model_rejects_small_cap():
    with pytest.raises(ValueError, match="a-priori"):
        benchmark_model(C_y=0.5)
    with pytest.raises(ValueError):
        benchmark_model(C_y=-1.0)


def test_pandemic_coefficients_shape():
    m = benchmark_model()
    c = pandemic_coefficients(m)
    x = np.array([[-1.0], [0.5], [2.0]])
    y = np.array([[0.2], [0.2], [5.0]])
    np.testing.assert_allclose(c.b(0.0, x)[:, 0], 0.3 + 0.1 * np.abs(x[:, 0]))
    np.testing.assert_allclose(c.g(0.0, x, y, None)[:, 0], -cutoff(y[:, 0], m.cap) / 2)
    np.testing.assert_array_equal(c.h(x), 0.0)


def test_zero_cost_gives_zero_adjoint():
    m = benchmark_model(q=ZERO, dq_plus=ZERO)
    sol = solve_pandemic(m, TimeGrid(1.0, 20), 20_000, seed=1)
    assert np.max(np.abs(sol.Y)) <= 0.01


def test_optimal_policy_examples():
    np.testing.assert_array_equal(optimal_policy(np.zeros((4, 3))), 0.0)
    np.testing.assert_array_equal(optimal_policy(np.array([[3.0, -1.0]])), [[1.5, 0.0]])


def test_zero_policy_zero_cost():
    m = benchmark_model(q=ZERO, dq_plus=ZERO)
    grid = TimeGrid(1.0, 20)
    est = evaluate_policy_cost(m, 0.0, sample_noise(grid, 1000, 1, seed=2), grid)
    assert est.J == 0.0 and est.stderr == 0.0


@given(st.floats(0.0, 2.0))
def test_constant_policy_cost(a):
    m = benchmark_model(q=ZERO, dq_plus=ZERO)
    grid = TimeGrid(1.0, 16)
    est = evaluate_policy_cost(m, a, sample_noise(grid, 50, 1, seed=0), grid)
    assert est.J == pytest.approx(a * a * m.T, rel=1e-12, abs=1e-15)


def test_policy_array_shape_is_checked():
    m = benchmark_model()
    grid = TimeGrid(1.0, 10)
    with pytest.raises(ValueError):
        evaluate_policy_cost(m, np.zeros((10, 5)), sample_noise(grid, 10, 1), grid)


@pytest.fixture(scope="module")
def pandemic_pair():
    grid = TimeGrid(1.0, 25)
    m = benchmark_model()
    base = solve_pandemic(m, grid, 20_000, seed=4)
    wide = solve_pandemic(benchmark_model(C_y=2.0 * m.cap), grid, 20_000, seed=4)
    return m, base, wide


def test_pandemic_comparison_bound(pandemic_pair):
    m, sol, _ = pandemic_pair
    upper = m.y_upper(sol.grid.nodes)[None, :]
    Y = sol.Y[:, :, 0]
    assert Y.min() >= -0.01 and np.all(Y <= upper + 0.01)


def test_optimal_policy_within_cap(pandemic_pair):
    m, sol, _ = pandemic_pair
    a = optimal_policy(sol)
    assert a.min() >= 0.0 and a.max() <= m.cap / 2


def test_localization_inertness(pandemic_pair):
    _, base, wide = pandemic_pair
    np.testing.assert_allclose(optimal_policy(base), optimal_policy(wide), atol=1e-12)


# -- carbon -----------------------------------------------------------------


def test_aggregate_abatement_examples():
    assert aggregate_abatement(np.array([1.0]), np.array([0.3]), [0.5], 0.0)[0] == pytest.approx(0.6, abs=1e-15)
    assert aggregate_abatement(np.array([-1.0]), np.array([0.3]), [0.5], 0.0)[0] == 0.3


@pytest.mark.parametrize("alphas", [(0.0,), (1.0,), (0.3, 1.2), (-0.1,)])
def test_alpha_outside_unit_interval(alphas):
    with pytest.raises(ValueError):
        CarbonModel(alphas=alphas)


def test_carbon_coefficients_drift_sign():
    m = CarbonModel()
    c = carbon_coefficients(m)
    x, y = np.array([[0.5]]), np.array([[0.4]])
    drift = c.b(0.0, x) + c.sigma(0.0, x)[:, :, 0] * c.g(0.0, x, y, None)
    expected = 0.5 - aggregate_abatement(x[:, 0], y[:, 0], m.alphas, m.K)
    np.testing.assert_allclose(drift[:, 0], expected, rtol=1e-14)
    np.testing.assert_array_equal(c.h(np.array([[0.39], [0.4]]))[:, 0], [0.0, 1.0])


def test_zero_penalty_gives_zero_price():
    p = price_allowance(CarbonModel(lam=0.0), TimeGrid(1.0, 20), 20_000, seed=1)
    assert abs(p.Y0) <= 0.01
    assert np.max(np.abs(p.solution.Y)) <= 0.01


def test_always_exceeded_cap():
    m = CarbonModel(Lam=-5.0 - 1e3)
    p = price_allowance(m, TimeGrid(1.0, 20), 20_000, seed=1)
    assert abs(p.Y0 - m.lam) <= 0.02


@pytest.fixture(scope="module")
def carbon_run():
    m = CarbonModel()
    return m, price_allowance(m, TimeGrid(1.0, 50), 40_000, seed=5)


def test_carbon_price_range(carbon_run):
    m, p = carbon_run
    assert p.solution.Y.min() >= -0.01 and p.solution.Y.max() <= m.lam + 0.01
    assert 0.0 < p.Y0 < m.lam


def test_carbon_martingale(carbon_run):
    m, p = carbon_run
    s = p.summary
    assert abs(s["mean_YT"] - s["Y0"]) <= 3.0 * math.hypot(s["stderr_YT"], s["Y0_stderr"])


def test_abatement_nonnegative_and_jumps(carbon_run):
    m, p = carbon_run
    Y = p.solution.Y[:, :, 0]
    xi = p.schedules
    assert np.all(xi[Y >= 0] >= 0)
    E = p.solution.X.states[:, :, 0]
    cross = (E[:, :-1] < m.K) & (E[:, 1:] >= m.K)
    assert cross.any()
    for k, a in enumerate(m.alphas):
        before = p.multipliers[:, :-1, k][cross]
        after = p.multipliers[:, 1:, k][cross]
        assert np.all(before == 1.0) and np.all(after == 1.0 / (1.0 - a))
    np.testing.assert_array_equal(xi, Y[:, :, None] * p.multipliers)


def test_multiplier_threshold_is_left_closed():
    mult = abatement_multiplier(np.array([0.2 - 1e-12, 0.2]), (0.5,), 0.2)
    np.testing.assert_array_equal(mult[:, 0], [1.0, 2.0])
