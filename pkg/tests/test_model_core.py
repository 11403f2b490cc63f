import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbsde_lab.applications import CarbonModel, carbon_coefficients
from fbsde_lab.errors import DimensionError
from fbsde_lab.model import (
    CoefficientSet,
    ConditionProfile,
    Dimensions,
    GrowthConstants,
    augmented_driver,
    project_ball,
    truncate_coefficients,
    y_bound,
)

from conftest import scalar_problem

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_dimensions_must_be_positive():
    with pytest.raises(DimensionError):
        Dimensions(0, 1, 1)


def test_profile_rejects_u2_with_vector_y():
    prof = ConditionProfile(uniqueness_condition="U2")
    with pytest.raises(DimensionError):
        prof.check_dims(Dimensions(1, 1, 2))


def test_constants_validated():
    with pytest.raises(ValueError):
        GrowthConstants(epsilon=0.0)
    with pytest.raises(ValueError):
        GrowthConstants(C=-1.0)


def test_horizon_must_be_positive():
    with pytest.raises(ValueError):
        scalar_problem(T=0.0)


def test_x0_shape_checked():
    with pytest.raises(DimensionError):
        CoefficientSet(Dimensions(2, 1, 1), None, None, None, None, None, T=1.0, x0=[0.0])


# -- augmented driver ---------------------------------------------------------------
def test_augmented_driver_zero():
    fbar = augmented_driver(scalar_problem())
    out = fbar(0.0, np.ones((4, 1)), np.ones((4, 1)), np.ones((4, 1, 1)))
    assert np.array_equal(out, np.zeros((4, 1)))


def test_augmented_driver_arithmetic():
    c = scalar_problem(f=lambda t, x, y, z: np.ones_like(y), g=lambda t, x, y, z: np.full((x.shape[0], 1), 2.0))
    out = augmented_driver(c)(0.0, np.zeros((1, 1)), np.zeros((1, 1)), np.full((1, 1, 1), 3.0))
    assert out[0, 0] == 7.0


def test_augmented_driver_carbon_example():
    model = CarbonModel(alphas=(0.5,), K=0.0, lam=1.0, sigma=1.0)
    c = carbon_coefficients(model)
    out = augmented_driver(c)(0.0, np.array([[1.0]]), np.array([[0.3]]), np.array([[[0.2]]]))
    # f = 0; g = -g_agg / sigma; the derived value quotes |z g_agg| = 0.2 * 0.3 / 0.5
    assert out[0, 0] == pytest.approx(-0.12, abs=1e-15)
    assert abs(out[0, 0]) == pytest.approx(0.12, abs=1e-15)


def test_augmented_driver_dimension_mismatch():
    c = CoefficientSet(
        Dimensions(1, 2, 1), b=None, sigma=None, f=lambda t, x, y, z: y,
        g=lambda t, x, y, z: np.zeros((x.shape[0], 3)), h=None, T=1.0, x0=[0.0],
    )
    with pytest.raises(DimensionError):
        augmented_driver(c)(0.0, np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 1, 2)))


def test_augmented_driver_matrix_vector():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((5, 2, 3))
    gv = rng.standard_normal((5, 3))
    c = CoefficientSet(
        Dimensions(1, 3, 2), b=None, sigma=None, f=lambda t, x, y, z: np.zeros((x.shape[0], 2)),
        g=lambda t, x, y, z: gv, h=None, T=1.0, x0=[0.0],
    )
    out = augmented_driver(c)(0.0, np.zeros((5, 1)), np.zeros((5, 2)), z)
    expected = np.array([z[p] @ gv[p] for p in range(5)])
    np.testing.assert_allclose(out, expected, rtol=1e-14)


# -- truncation ---------------------------------------------------------------------
def _recording_problem():
    seen = {}

    def f(t, x, y, z):
        seen["y"] = y.copy()
        return y

    return scalar_problem(f=f, g=lambda t, x, y, z: 2.0 * y), seen


def test_truncation_inside_ball_is_identity():
    c, _ = _recording_problem()
    cN = truncate_coefficients(c, 2.0)
    y = np.array([[1.5], [-2.0]])
    args = (0.0, np.zeros((2, 1)), y, np.zeros((2, 1, 1)))
    assert np.array_equal(cN.f(*args), c.f(*args))
    assert np.array_equal(cN.g(*args), c.g(*args))


def test_truncation_radial_projection_scalar():
    c, seen = _recording_problem()
    truncate_coefficients(c, 1.0).f(0.0, np.zeros((1, 1)), np.array([[4.0]]), np.zeros((1, 1, 1)))
    assert seen["y"][0, 0] == 1.0


def test_truncation_boundary_fixed():
    y = np.array([[3.0, 4.0]])
    assert np.array_equal(project_ball(y, 5.0), y)


def test_truncation_leaves_b_sigma_h():
    c = scalar_problem()
    cN = truncate_coefficients(c, 3.0)
    assert cN.b is c.b and cN.sigma is c.sigma and cN.h is c.h


def test_truncation_radius_positive():
    with pytest.raises(ValueError):
        truncate_coefficients(scalar_problem(), 0.0)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20), st.floats(0.01, 100.0))
def test_projection_idempotent(rows, N):
    y = np.array(rows, dtype=float)
    once = project_ball(y, N)
    assert np.array_equal(project_ball(once, N), once)
    assert np.all(np.linalg.norm(once, axis=1) <= N * (1 + 1e-12))


@given(st.lists(finite, min_size=1, max_size=20), st.floats(0.01, 100.0))
def test_truncated_coefficients_idempotent(ys, N):
    c, _ = _recording_problem()
    once = truncate_coefficients(c, N)
    twice = truncate_coefficients(once, N)
    y = np.array(ys)[:, None]
    args = (0.0, np.zeros_like(y), y, np.zeros((len(ys), 1, 1)))
    assert np.array_equal(once.f(*args), twice.f(*args))
    assert np.array_equal(once.g(*args), twice.g(*args))


@given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=20), st.floats(1.0, 50.0))
def test_truncation_agrees_inside_ball(ys, N):
    c, _ = _recording_problem()
    y = np.array(ys)[:, None] * N
    args = (0.5, np.ones_like(y), y, np.ones((len(ys), 1, 1)))
    cN = truncate_coefficients(c, N)
    assert np.array_equal(cN.f(*args), c.f(*args))
    assert np.array_equal(cN.g(*args), c.g(*args))


# -- y_bound -------------------------------------------------------------------------
def test_y_bound_trivial():
    assert y_bound(0.0, 1.0) == 1.0


def test_y_bound_published_value():
    assert y_bound(1.0, 1.0) == pytest.approx(math.e ** 2 * math.sqrt(2.0), rel=1e-14)
    # 30-digit mpmath evaluation of e^2 sqrt(2)
    assert y_bound(1.0, 1.0) == pytest.approx(10.449703348243359, rel=1e-14)


def test_y_bound_derived_value():
    # frozen 30-digit mpmath evaluation of exp(0.5) sqrt(1.25)
    assert y_bound(1.0, 0.25) == pytest.approx(1.8433264186176594, rel=1e-14)


def test_y_bound_domain():
    with pytest.raises(ValueError):
        y_bound(-1.0, 1.0)
    with pytest.raises(ValueError):
        y_bound(1.0, 0.0)


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.01, 3.0), st.floats(0.01, 3.0))
def test_y_bound_monotone(C1, C2, T1, T2):
    lo_C, hi_C = sorted((C1, C2))
    lo_T, hi_T = sorted((T1, T2))
    assert y_bound(lo_C, lo_T) <= y_bound(hi_C, lo_T)
    assert y_bound(lo_C, lo_T) <= y_bound(lo_C, hi_T)


def test_check_shapes_catches_bad_output():
    c = scalar_problem(h=lambda x: np.zeros(x.shape[0]))
    with pytest.raises(DimensionError):
        c.check_shapes()
