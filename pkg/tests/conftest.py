import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fbsde_lab.model import CoefficientSet, Dimensions

settings.register_profile(
    "fbsde", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("fbsde")


def zeros_like_x(t, x):
    return np.zeros_like(x)


def unit_sigma(t, x):
    return np.ones((x.shape[0], 1, 1))


def no_coupling(t, x, y, z):
    return np.zeros((x.shape[0], 1))


def zero_driver(t, x, y, z):
    return np.zeros_like(y)


def scalar_problem(f=zero_driver, g=no_coupling, h=None, b=zeros_like_x, sigma=unit_sigma, T=1.0, x0=0.0, **kw):
    """One-dimensional coefficient set with the usual benchmark defaults."""
    if h is None:
        h = lambda x: x.copy()  # noqa: E731
    return CoefficientSet(dims=Dimensions(1, 1, 1), b=b, sigma=sigma, f=f, g=g, h=h, T=T, x0=[x0], **kw)


@pytest.fixture
def scalar():
    return scalar_problem
