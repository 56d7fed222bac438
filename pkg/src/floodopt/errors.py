"""Exception hierarchy shared across the package.

The CLI maps each family to a stable exit code: config errors -> 2,
file/format errors -> 3, numeric failures -> 4, domain/geometry -> 5.
"""


class FloodOptError(Exception):
    """Base class for all package errors."""


class ConfigError(FloodOptError):
    """Invalid or inconsistent run configuration."""


class FormatError(FloodOptError):
    """Malformed input or output file (DEM, hydrograph CSV, snapshot)."""


class NumericError(FloodOptError):
    """Non-finite or otherwise unusable numerical state."""


class DomainError(FloodOptError):
    """Argument outside its admissible domain (time span, search region)."""


class GeometryError(DomainError):
    """Degenerate or out-of-bounds geometric input."""


class EvaluationError(FloodOptError):
    """Objective evaluation failed; carries the dam center that failed."""

    def __init__(self, center, cause):
        super().__init__(f"objective evaluation failed at center {center}: {cause}")
        self.center = tuple(center)
        self.cause = cause
