"""Solvers for a kinetic fluidity model of aging yield-stress fluids.

The stress distribution of mesoscopic elements is advanced by a finite-volume
grid scheme, by the explicit renewal solution along characteristics and by
Monte Carlo simulation of the underlying jump process. Delay-equation tools
give the convergence rate toward equilibrium; slow-time closures approximate
fluidity and stress under slowly varying shear.
"""

from __future__ import annotations

from .errors import (
    AgingFluidError,
    CFLViolationError,
    ConfigurationError,
    DegenerateShearError,
    DiscrepancyError,
    FitError,
    GeometryError,
    InsufficientPointsError,
    InvariantViolationError,
    NonPositiveSampleError,
    NoRootFoundError,
    OutOfRangeError,
    QuadratureError,
    ResolutionError,
)
from .initial import GridSampled, InitialDensity, StationaryInitial, TruncatedGaussian, UniformInterval
from .model import (
    Affine,
    Constant,
    LinearRamp,
    ModelParams,
    ShearProfile,
    SteadyObservables,
    TimeScaled,
    closure_kappa,
    gamma_accum,
    gamma_inverse,
    indicator,
    occupation_time,
    stationary_density,
    steady_observables,
)

__all__ = [
    "AgingFluidError", "CFLViolationError", "ConfigurationError", "DegenerateShearError",
    "DiscrepancyError", "FitError", "GeometryError", "InsufficientPointsError",
    "InvariantViolationError", "NonPositiveSampleError", "NoRootFoundError", "OutOfRangeError",
    "QuadratureError", "ResolutionError",
    "GridSampled", "InitialDensity", "StationaryInitial", "TruncatedGaussian", "UniformInterval",
    "Affine", "Constant", "LinearRamp", "ModelParams", "ShearProfile", "SteadyObservables",
    "TimeScaled", "closure_kappa", "gamma_accum", "gamma_inverse", "indicator", "occupation_time",
    "stationary_density", "steady_observables",
]
