"""Numerical laboratory for coupled forward-backward SDEs with measurable coefficients."""
from ._accel import backend_name
from .bsde import DecouplingField, PicardConfig, backward_sweep, solve_decoupled_bsde
from .errors import (
    ConfigError,
    DimensionError,
    FbsdeError,
    NumericalError,
    RegressionError,
    SimulationError,
    StabilityError,
)
from .model import (
    CoefficientSet,
    ConditionProfile,
    Dimensions,
    GrowthConstants,
    augmented_driver,
    project_ball,
    truncate_coefficients,
    y_bound,
)
from .paths import NoiseBlock, PathEnsemble, TimeGrid, sample_noise, simulate_sde
from .pipeline import FbsdeSolution, solve_decoupled_only, solve_fbsde
from .regression import BasisSpec, fit_conditional_expectation

__version__ = "0.1.0"

__all__ = [
    "BasisSpec", "CoefficientSet", "ConditionProfile", "ConfigError", "DecouplingField", "DimensionError",
    "Dimensions", "FbsdeError", "FbsdeSolution", "GrowthConstants", "NoiseBlock", "NumericalError", "PathEnsemble",
    "PicardConfig", "RegressionError", "SimulationError", "StabilityError", "TimeGrid", "augmented_driver",
    "backend_name", "backward_sweep", "fit_conditional_expectation", "project_ball", "sample_noise",
    "simulate_sde", "solve_decoupled_bsde", "solve_decoupled_only", "solve_fbsde", "truncate_coefficients",
    "y_bound",
]
