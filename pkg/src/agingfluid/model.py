"""Parameters, shear profiles, the threshold indicator and stationary states.

Every profile exposes its rate, its accumulated shear ``gamma(t)`` and the
exact inverse of ``gamma``. Functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateShearError, OutOfRangeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    """Physical and discretisation constants.

    Parameters
    ----------
    sigma_c : float
        Stress threshold above which elements relax.
    m_sigma : float
        Half-width of the periodic stress domain.
    n_cells : int
        Requested number of cells (the grid may adjust it for alignment).
    dt : float
        Outer time step for fixed-step grid runs.
    t_end : float
        Time horizon.
    """

    sigma_c: float = 2.0
    m_sigma: float = 10.0
    n_cells: int = 4000
    dt: float = 5e-3
    t_end: float = 40.0

    def __post_init__(self) -> None:
        if not self.sigma_c > 0:
            raise ConfigurationError(f"sigma_c must be positive, got {self.sigma_c}")
        if not self.m_sigma > self.sigma_c:
            raise ConfigurationError(
                f"m_sigma ({self.m_sigma}) must exceed sigma_c ({self.sigma_c})"
            )
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise ConfigurationError(f"n_cells must be an integer >= 8, got {self.n_cells}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}")

    @property
    def dsigma(self) -> float:
        """Nominal cell size ``2 m_sigma / n_cells``."""
        return 2.0 * self.m_sigma / self.n_cells


def indicator(sigma, sigma_c: float):
    """Return 1 where ``|sigma| > sigma_c`` and 0 on the closed elastic window."""
    if not sigma_c > 0:
        raise ConfigurationError("sigma_c must be positive")
    out = (np.abs(np.asarray(sigma, dtype=float)) > sigma_c).astype(float)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Shear profiles
# ---------------------------------------------------------------------------


class ShearProfile(ABC):
    """Driving shear rate with closed-form accumulation and inverse."""

    @abstractmethod
    def rate(self, t):
        """Shear rate at time ``t``."""

    @abstractmethod
    def accum(self, t):
        """Accumulated shear ``gamma(t)``, the integral of the rate from 0."""

    @abstractmethod
    def rate_derivative(self, t):
        """Time derivative of the shear rate."""

    @property
    @abstractmethod
    def lower_bound(self) -> float:
        """Infimum of the rate over ``[0, inf)``."""

    @abstractmethod
    def upper_bound(self, t_end: float) -> float:
        """Supremum of the rate over ``[0, t_end]``."""

    def inverse(self, y):
        """Time at which the accumulated shear equals ``y`` (no range checks)."""
        return bisect_inverse(self, y)


def bisect_inverse(profile: ShearProfile, y, rel_tol: float = 1e-13):
    """Invert ``profile.accum`` by vectorised bisection.

    Used as a fallback for profiles without a closed-form inverse and as an
    independent oracle in tests.
    """
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(200):
        short = profile.accum(hi) < y
        if not np.any(short):
            break
        hi = np.where(short, 2.0 * hi, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = profile.accum(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= rel_tol * np.maximum(hi, 1e-300)):
            break
    out = 0.5 * (lo + hi)
    return float(out) if out.ndim == 0 else out


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class Constant(ShearProfile):
    """Constant shear rate."""

    value: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.value) or self.value <= 0:
            raise DegenerateShearError(f"constant shear rate must be positive, got {self.value}")

    def rate(self, t):
        return _scalar_or_array(np.full_like(np.asarray(t, dtype=float), self.value))

    def accum(self, t):
        return _scalar_or_array(self.value * np.asarray(t, dtype=float))

    def rate_derivative(self, t):
        return _scalar_or_array(np.zeros_like(np.asarray(t, dtype=float)))

    @property
    def lower_bound(self) -> float:
        return self.value

    def upper_bound(self, t_end: float) -> float:
        return self.value

    def inverse(self, y):
        return _scalar_or_array(np.asarray(y, dtype=float) / self.value)


@dataclass(frozen=True)
class LinearRamp(ShearProfile):
    """Shear rate growing linearly from zero, ``rate(t) = slope * t``."""

    slope: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.slope) or self.slope <= 0:
            raise DegenerateShearError(f"ramp slope must be positive, got {self.slope}")

    def rate(self, t):
        return _scalar_or_array(self.slope * np.asarray(t, dtype=float))

    def accum(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(0.5 * self.slope * t * t)

    def rate_derivative(self, t):
        return _scalar_or_array(np.full_like(np.asarray(t, dtype=float), self.slope))

    @property
    def lower_bound(self) -> float:
        return 0.0

    def upper_bound(self, t_end: float) -> float:
        return self.slope * t_end

    def inverse(self, y):
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        return _scalar_or_array(np.sqrt(2.0 * y / self.slope))


@dataclass(frozen=True)
class Affine(ShearProfile):
    """Shear rate ``offset + slope * t`` with a positive offset."""

    offset: float
    slope: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.offset) or self.offset <= 0:
            raise DegenerateShearError(f"affine offset must be positive, got {self.offset}")
        if not np.isfinite(self.slope) or self.slope < 0:
            raise DegenerateShearError(
                f"a negative slope makes the rate change sign, got {self.slope}"
            )

    def rate(self, t):
        return _scalar_or_array(self.offset + self.slope * np.asarray(t, dtype=float))

    def accum(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(self.offset * t + 0.5 * self.slope * t * t)

    def rate_derivative(self, t):
        return _scalar_or_array(np.full_like(np.asarray(t, dtype=float), self.slope))

    @property
    def lower_bound(self) -> float:
        return self.offset

    def upper_bound(self, t_end: float) -> float:
        return self.offset + self.slope * t_end

    def inverse(self, y):
        # cancellation-free root of slope/2 t^2 + offset t - y = 0
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        disc = np.sqrt(self.offset**2 + 2.0 * self.slope * y)
        return _scalar_or_array(2.0 * y / (self.offset + disc))


@dataclass(frozen=True)
class TimeScaled(ShearProfile):
    """Slowly varying profile: ``rate(t) = inner.rate(epsilon * t)``."""

    inner: ShearProfile
    epsilon: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")

    def rate(self, t):
        return self.inner.rate(self.epsilon * np.asarray(t, dtype=float))

    def accum(self, t):
        return _scalar_or_array(
            np.asarray(self.inner.accum(self.epsilon * np.asarray(t, dtype=float))) / self.epsilon
        )

    def rate_derivative(self, t):
        return _scalar_or_array(
            self.epsilon * np.asarray(self.inner.rate_derivative(self.epsilon * np.asarray(t, dtype=float)))
        )

    @property
    def lower_bound(self) -> float:
        return self.inner.lower_bound

    def upper_bound(self, t_end: float) -> float:
        return self.inner.upper_bound(self.epsilon * t_end)

    def inverse(self, y):
        return _scalar_or_array(
            np.asarray(self.inner.inverse(self.epsilon * np.asarray(y, dtype=float))) / self.epsilon
        )


def gamma_accum(profile: ShearProfile, t):
    """Accumulated shear ``gamma(t)`` for ``t >= 0``."""
    if np.any(np.asarray(t) < 0):
        raise OutOfRangeError("accumulated shear is defined for t >= 0 only")
    return profile.accum(t)


def gamma_inverse(profile: ShearProfile, y, t_end: float | None = None):
    """Checked inverse of the accumulated shear.

    Parameters
    ----------
    profile : ShearProfile
        Must declare a positive lower bound on its rate.
    y : float or ndarray
        Accumulated shear, ``y >= 0``.
    t_end : float, optional
        If given, ``y`` may not exceed ``gamma(t_end)``.

    Raises
    ------
    DegenerateShearError
        If the profile has no positive rate lower bound.
    OutOfRangeError
        If ``y`` is negative or beyond ``gamma(t_end)``.
    """
    if not profile.lower_bound > 0:
        raise DegenerateShearError(
            f"{type(profile).__name__} has no positive rate lower bound; inverse not checked"
        )
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0):
        raise OutOfRangeError("accumulated shear must be nonnegative")
    if t_end is not None and np.any(y_arr > profile.accum(t_end) * (1 + 1e-14)):
        raise OutOfRangeError(f"accumulated shear exceeds gamma(t_end={t_end})")
    return profile.inverse(y)


def occupation_parts(profile: ShearProfile, t: float, sigma, sigma_c: float):
    """Split the occupation time into time spent below ``-sigma_c`` and above ``+sigma_c``.

    The characteristic through ``(t, sigma)`` is ``s(u) = sigma - gamma(t) + gamma(u)``.
    Because it is nondecreasing, the time with ``s(u) < -sigma_c`` is an initial
    segment and the time with ``s(u) > sigma_c`` is a final segment of ``[0, t]``.
    """
    sigma = np.asarray(sigma, dtype=float)
    g_t = float(profile.accum(t))
    y_low = np.clip(g_t - sigma - sigma_c, 0.0, g_t)
    y_high = np.clip(g_t - sigma + sigma_c, 0.0, g_t)
    below = np.clip(profile.inverse(y_low), 0.0, t)
    above = t - np.clip(profile.inverse(y_high), 0.0, t)
    # exact endpoints so the clamped branches never carry inversion round-off
    below = np.where(y_low >= g_t, t, np.where(y_low <= 0, 0.0, below))
    above = np.where(y_high <= 0, t, np.where(y_high >= g_t, 0.0, above))
    return _scalar_or_array(below), _scalar_or_array(above)


def occupation_time(profile: ShearProfile, t: float, sigma, sigma_c: float):
    """Time spent above threshold along the characteristic ending at ``(t, sigma)``."""
    if t < 0:
        raise OutOfRangeError("t must be nonnegative")
    below, above = occupation_parts(profile, t, sigma, sigma_c)
    return _scalar_or_array(np.asarray(below) + np.asarray(above))


# ---------------------------------------------------------------------------
# Stationary state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteadyObservables:
    """Closed-form fluidity, stress, tail moment and closure coefficient at steady state."""

    f_inf: float
    tau_inf: float
    beta_inf: float
    kappa: float


def stationary_density(sigma, gamma_inf: float, sigma_c: float):
    """Stationary stress density under a constant shear rate.

    Zero for ``sigma <= 0``, flat at ``1/(sigma_c + gamma_inf)`` up to the
    threshold, then exponentially decaying with length ``gamma_inf``. The value
    at the single point ``sigma = 0`` is taken as 0. A negative rate gives the
    mirror image.
    """
    if gamma_inf == 0:
        raise DegenerateShearError("stationary state is not unique at zero shear rate")
    if not sigma_c > 0:
        raise ConfigurationError("sigma_c must be positive")
    sigma = np.asarray(sigma, dtype=float)
    if gamma_inf < 0:
        sigma, gamma_inf = -sigma, -gamma_inf
    height = 1.0 / (sigma_c + gamma_inf)
    tail = height * np.exp(-np.maximum(sigma - sigma_c, 0.0) / gamma_inf)
    out = np.where(sigma <= 0, 0.0, tail)
    return _scalar_or_array(out)


def closure_kappa(gamma_rate, sigma_c: float):
    """Closure coefficient ``2 / (1 + 1/(1 + sigma_c/rate)^2)``; tends to 2 as the rate vanishes."""
    g = np.asarray(gamma_rate, dtype=float)
    with np.errstate(divide="ignore"):
        ratio = np.where(g > 0, g / (g + sigma_c), 0.0)
    return _scalar_or_array(2.0 / (1.0 + ratio * ratio))


def steady_observables(gamma_rate: float, sigma_c: float) -> SteadyObservables:
    """Steady-state fluidity, stress, tail moment and closure coefficient."""
    if not gamma_rate > 0:
        raise DegenerateShearError(f"steady observables need a positive rate, got {gamma_rate}")
    if not sigma_c > 0:
        raise ConfigurationError("sigma_c must be positive")
    g, s = float(gamma_rate), float(sigma_c)
    f_inf = g / (s + g)
    tau_inf = 0.5 * (g * g / (s + g) + s + g)
    kappa = float(closure_kappa(g, s))
    return SteadyObservables(f_inf=f_inf, tau_inf=tau_inf, beta_inf=g, kappa=kappa)
