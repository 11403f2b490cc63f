"""Named coefficient sets reachable from an experiment configuration.

``pandemic`` and ``carbon`` build the application models, ``benchmark:<name>``
the closed-form problems of :mod:`fbsde_lab.reference`.  ``custom-reference``
resolves to whatever coefficient factory was registered with
:func:`register_custom_reference`; custom coefficients cannot be written in
a configuration file.
"""
from __future__ import annotations

from typing import Callable, Optional

from .applications.carbon import CarbonModel, carbon_coefficients
from .applications.pandemic import PandemicModel, benchmark_model, pandemic_coefficients
from .errors import ConfigError
from .model import CoefficientSet
from .reference import BENCHMARK_PROBLEMS

_custom_reference: Optional[Callable[[], CoefficientSet]] = None

CARBON_KEYS = ("alphas", "K", "lam", "Lam", "b", "sigma", "E0", "T")
PANDEMIC_KEYS = ("sigma", "T", "x0", "C_y")


def register_custom_reference(factory: Optional[Callable[[], CoefficientSet]]) -> None:
    """Make ``factory()`` the coefficient set of the ``custom-reference`` preset (``None`` clears it)."""
    global _custom_reference
    _custom_reference = factory


def preset_names():
    return ("pandemic", "carbon", "custom-reference") + tuple(f"benchmark:{k}" for k in BENCHMARK_PROBLEMS)


def carbon_model(params: Optional[dict] = None) -> CarbonModel:
    params = dict(params or {})
    bad = set(params) - set(CARBON_KEYS)
    if bad:
        raise ConfigError(f"cli: unknown carbon model keys {sorted(bad)}")
    if "alphas" in params:
        params["alphas"] = tuple(params["alphas"])
    return CarbonModel(**params)


def pandemic_model(params: Optional[dict] = None) -> PandemicModel:
    params = dict(params or {})
    bad = set(params) - set(PANDEMIC_KEYS)
    if bad:
        raise ConfigError(f"cli: unknown pandemic model keys {sorted(bad)}")
    return benchmark_model(**params)


def build_coefficients(preset: str, model_params: Optional[dict] = None) -> CoefficientSet:
    """Coefficient set for a preset name."""
    try:
        if preset == "pandemic":
            return pandemic_coefficients(pandemic_model(model_params))
        if preset == "carbon":
            return carbon_coefficients(carbon_model(model_params))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cli: invalid {preset} model parameters: {exc}") from exc
    if model_params:
        raise ConfigError(f"cli: preset {preset!r} takes no [model] parameters")
    if preset == "custom-reference":
        if _custom_reference is None:
            raise ConfigError("cli: preset 'custom-reference' has no registered coefficients; "
                              "call fbsde_lab.presets.register_custom_reference first")
        return _custom_reference()
    if preset.startswith("benchmark:"):
        name = preset.split(":", 1)[1]
        if name not in BENCHMARK_PROBLEMS:
            raise ConfigError(f"cli: unknown benchmark {name!r}; choose from {sorted(BENCHMARK_PROBLEMS)}")
        return BENCHMARK_PROBLEMS[name]()
    raise ConfigError(f"cli: unknown preset {preset!r}; choose from {list(preset_names())}")


__all__ = ["build_coefficients", "carbon_model", "pandemic_model", "preset_names", "register_custom_reference"]
