import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbsde_lab.applications import CarbonModel, benchmark_model, carbon_coefficients, pandemic_coefficients
from fbsde_lab.audit import REFUTED, SUPPORTED, SampleSpec, audit_conditions
from fbsde_lab.model import ConditionProfile, GrowthConstants

from conftest import scalar_problem

B1 = ConditionProfile(forward_condition="F1", backward_condition="B1", constants=GrowthConstants(C=2.0, r=0.0, epsilon=2.0))


def test_carbon_preset_supported():
    m = CarbonModel()
    c = carbon_coefficients(m)
    rep = audit_conditions(c, sample_spec=SampleSpec.box(c, y_radius=m.lam))
    assert set(rep.tags) == {"ellipticity", "F1", "B1", "U2"}
    assert all(v == SUPPORTED for v in rep.tags.values())
    assert rep.profile.declared_vs_verified["B1"] == SUPPORTED


def test_pandemic_preset_supported():
    m = benchmark_model()
    c = pandemic_coefficients(m)
    rep = audit_conditions(c, sample_spec=SampleSpec.box(c, y_radius=m.cap + 1.5))
    assert set(rep.tags) == {"ellipticity", "F3", "B4", "U2"}
    assert all(v == SUPPORTED for v in rep.tags.values())


def test_degenerate_sigma_refuted():
    c = scalar_problem(sigma=lambda t, x: np.zeros((x.shape[0], 1, 1)), h=lambda x: np.tanh(x))
    rep = audit_conditions(c, B1, SampleSpec.box(c))
    assert rep.tags["ellipticity"] == REFUTED
    ell = rep.checks[0]
    assert ell.witness["eigenvalue"] == 0.0
    assert "witness" in ell.line()
    assert rep.refuted


def test_missing_sample_spec():
    c = scalar_problem()
    with pytest.raises(ValueError, match="empty"):
        audit_conditions(c, B1, None)


def test_empty_grid_rejected():
    with pytest.raises(ValueError, match="empty"):
        SampleSpec(t=[0.0], x=np.empty((0, 1)), y=[[0.0]], z=[[[0.0]]])


def test_sample_shape_mismatch():
    c = scalar_problem()
    spec = SampleSpec(t=[0.0], x=np.zeros((3, 2)), y=[[0.0]], z=[[[0.0]]])
    with pytest.raises(ValueError):
        audit_conditions(c, B1, spec)


@given(st.integers(0, 40), st.floats(1.01, 1e6))
def test_planted_driver_violation_never_supported(k, factor):
    base = scalar_problem(h=lambda x: np.tanh(x))
    spec = SampleSpec.box(base, n_t=2, n_y=3, n_z=3)
    xk = spec.x[k, 0]
    C = B1.constants.C

    def f(t, x, y, z):
        # C (1 + |x|^0 + |y| + |z|) is largest at the box corner: plant above it
        spike = factor * C * (2.0 + 1.0 + 3.0)
        return np.where(x == xk, spike, 0.0)

    rep = audit_conditions(scalar_problem(f=f, h=lambda x: np.tanh(x)), B1, spec)
    assert rep.tags["B1"] == REFUTED
    bad = [c for c in rep.checks if c.flag == "B1" and c.status == REFUTED]
    assert bad and bad[0].witness["x"][0] == xk


@given(st.floats(0.01, 0.99))
def test_planted_ellipticity_violation(scale):
    # sigma^2 = scale^2 < 1/eps = 1/2 somewhere on the grid
    base = scalar_problem()
    spec = SampleSpec.box(base, n_t=2, n_y=2, n_z=2)
    target = spec.x[7, 0]
    sig = lambda t, x: np.where(x == target, scale * 0.7, 1.0)[:, :, None]  # noqa: E731
    rep = audit_conditions(scalar_problem(sigma=sig, h=lambda x: np.tanh(x)), B1, spec)
    assert rep.tags["ellipticity"] == REFUTED
