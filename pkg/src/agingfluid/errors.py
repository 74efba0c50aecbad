"""Typed exceptions raised across the package."""

from __future__ import annotations


class AgingFluidError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(AgingFluidError, ValueError):
    """A parameter or configuration value is invalid."""


class DegenerateShearError(ConfigurationError):
    """The shear rate vanishes, changes sign, or lacks a positive lower bound."""


class OutOfRangeError(ConfigurationError):
    """A query falls outside the range where an object is defined."""


class GeometryError(ConfigurationError):
    """The stress grid cannot be laid out with the requested geometry."""


class CFLViolationError(AgingFluidError):
    """An advection step was requested with a Courant number above one."""


class ResolutionError(ConfigurationError):
    """A time grid is too coarse for the requested computation."""


class NoRootFoundError(AgingFluidError):
    """A root scan found no admissible sign change."""

    def __init__(self, message: str, scan_range: tuple[float, float]) -> None:
        super().__init__(f"{message} (scan range [{scan_range[0]:.3g}, {scan_range[1]:.3g}])")
        self.scan_range = scan_range


class FitError(AgingFluidError, ValueError):
    """A least-squares fit received unusable data."""


class NonPositiveSampleError(FitError):
    """A log-space fit received a sample that is zero or negative."""


class InsufficientPointsError(FitError):
    """A fit received fewer than three usable points."""


class QuadratureError(AgingFluidError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, error_estimate: float) -> None:
        super().__init__(f"{message} (error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


class InvariantViolationError(AgingFluidError):
    """A solver invariant (mass, positivity, bound) was violated."""


class DiscrepancyError(AgingFluidError):
    """Two independent computations of the same quantity disagree."""
