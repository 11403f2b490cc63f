"""Exception types.  Messages name the module and, where known, path/step indices."""
from __future__ import annotations


class FbsdeError(Exception):
    """Base class for all package errors."""


class DimensionError(FbsdeError, ValueError):
    pass


class ConfigError(FbsdeError, ValueError):
    pass


class NumericalError(FbsdeError, ArithmeticError):
    """Non-finite values, overflow guards, failed factorizations."""


class SimulationError(NumericalError):
    def __init__(self, message: str, path: int | None = None, step: int | None = None):
        super().__init__(message)
        self.path = path
        self.step = step


class RegressionError(NumericalError):
    def __init__(self, message: str, slice_index: int | None = None):
        super().__init__(message)
        self.slice_index = slice_index


class StabilityError(NumericalError):
    """Explicit-term bound violated in the finite-difference solver."""
