"""
Exception hierarchy shared by every manifold_lab app.

Input errors also subclass ValueError so callers that only know the standard
library still catch them. Management commands map ConfigError to exit code 2
and NumericFloorError to exit code 3.
"""


class LabError(Exception):
    """Base class for every failure raised by the lab."""


class GeometryError(LabError, ValueError):
    """Bad shapes, empty sets, non-finite points or rank-deficient charts."""


class SamplingError(LabError, ValueError):
    """Degenerate densities or a manifold that leaves its bounding box."""


class ConstructionError(LabError):
    """A built object failed its own numeric property verification."""


class CalibrationError(LabError, ValueError):
    """Threshold constants cannot satisfy the estimator's hypotheses."""


class NumericFloorError(LabError, ArithmeticError):
    """A requested parameter falls below what double precision can carry."""


class ConfigError(LabError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}


class ParameterError(LabError, ValueError):
    """A numeric argument lies outside its documented range."""
