"""Initial stress densities shared by the three solvers."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ConfigurationError
from .model import stationary_density


class InitialDensity(ABC):
    """A bounded probability density on the stress axis."""

    @abstractmethod
    def pdf(self, sigma):
        """Density values."""

    @abstractmethod
    def cdf(self, sigma):
        """Cumulative distribution function."""

    @abstractmethod
    def ppf(self, u):
        """Inverse of the cumulative distribution function on ``(0, 1)``."""

    @property
    @abstractmethod
    def support(self) -> tuple[float, float]:
        """Closed interval outside which the density vanishes (for quadrature)."""

    @property
    @abstractmethod
    def sup_norm(self) -> float:
        """Supremum of the density."""

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where the density is not smooth."""
        return self.support

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` samples by inverse transform."""
        u = rng.random(n)
        # rng.random is in [0, 1); keep away from the closed endpoint
        u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
        return np.asarray(self.ppf(u), dtype=float)


@dataclass(frozen=True)
class TruncatedGaussian(InitialDensity):
    """Standard normal renormalised on ``[-half_width, half_width]``."""

    half_width: float = 10.0
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self) -> None:
        if not self.half_width > 0 or not self.std > 0:
            raise ConfigurationError("half_width and std must be positive")

    @property
    def _edges(self) -> tuple[float, float, float]:
        a = (-self.half_width - self.mean) / self.std
        b = (self.half_width - self.mean) / self.std
        lo = float(special.ndtr(a))
        return a, lo, float(special.ndtr(b)) - lo

    def pdf(self, sigma):
        s = np.asarray(sigma, dtype=float)
        z = (s - self.mean) / self.std
        _, _, mass = self._edges
        dens = np.exp(-0.5 * z * z) / (self.std * math.sqrt(2.0 * math.pi) * mass)
        out = np.where(np.abs(s) <= self.half_width, dens, 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, sigma):
        s = np.clip(np.asarray(sigma, dtype=float), -self.half_width, self.half_width)
        _, lo, mass = self._edges
        out = np.clip((special.ndtr((s - self.mean) / self.std) - lo) / mass, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def ppf(self, u):
        _, lo, mass = self._edges
        x = self.mean + self.std * special.ndtri(lo + np.asarray(u, dtype=float) * mass)
        return np.clip(x, -self.half_width, self.half_width)

    @property
    def support(self) -> tuple[float, float]:
        return (-self.half_width, self.half_width)

    @property
    def sup_norm(self) -> float:
        return float(self.pdf(np.clip(self.mean, -self.half_width, self.half_width)))


@dataclass(frozen=True)
class UniformInterval(InitialDensity):
    """Uniform density on the open interval ``(lower, upper)``."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.upper > self.lower:
            raise ConfigurationError("upper must exceed lower")

    def pdf(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        out = np.where((sigma > self.lower) & (sigma < self.upper), 1.0 / (self.upper - self.lower), 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        out = np.clip((sigma - self.lower) / (self.upper - self.lower), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def ppf(self, u):
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    @property
    def support(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    @property
    def sup_norm(self) -> float:
        return 1.0 / (self.upper - self.lower)


@dataclass(frozen=True)
class StationaryInitial(InitialDensity):
    """The constant-shear stationary density used as an initial datum.

    The exponential tail is cut where it falls below ``1e-300`` relative.
    """

    gamma_inf: float
    sigma_c: float

    def __post_init__(self) -> None:
        if not self.gamma_inf > 0:
            raise ConfigurationError("gamma_inf must be positive")

    def pdf(self, sigma):
        return stationary_density(sigma, self.gamma_inf, self.sigma_c)

    def cdf(self, sigma):
        s = np.asarray(sigma, dtype=float)
        h = 1.0 / (self.sigma_c + self.gamma_inf)
        flat = h * np.clip(s, 0.0, self.sigma_c)
        tail = h * self.gamma_inf * -np.expm1(-np.maximum(s - self.sigma_c, 0.0) / self.gamma_inf)
        out = flat + tail
        return float(out) if out.ndim == 0 else out

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        h = 1.0 / (self.sigma_c + self.gamma_inf)
        knee = h * self.sigma_c
        flat = u / h
        rest = np.clip((u - knee) / (h * self.gamma_inf), 0.0, 1.0)
        tail = self.sigma_c - self.gamma_inf * np.log1p(-np.minimum(rest, 1.0 - 1e-16))
        return np.where(u <= knee, flat, tail)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, self.sigma_c + 700.0 * self.gamma_inf)

    @property
    def sup_norm(self) -> float:
        return 1.0 / (self.sigma_c + self.gamma_inf)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (0.0, self.sigma_c, self.support[1])


@dataclass(frozen=True, eq=False)
class GridSampled(InitialDensity):
    """Piecewise-linear density through ``(sigma, values)``, zero outside the nodes.

    The values are rescaled so the trapezoid integral is one.
    """

    sigma: np.ndarray
    values: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        s = np.asarray(self.sigma, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or s.size < 2:
            raise ConfigurationError("sigma and values must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(s) <= 0):
            raise ConfigurationError("sigma nodes must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ConfigurationError("density values must be finite and nonnegative")
        cum = np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(s))))
        if cum[-1] <= 0:
            raise ConfigurationError("density has zero mass")
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "values", v / cum[-1])
        object.__setattr__(self, "_cum", cum / cum[-1])

    def pdf(self, sigma):
        out = np.interp(sigma, self.sigma, self.values, left=0.0, right=0.0)
        return float(out) if np.ndim(out) == 0 else out

    def cdf(self, sigma):
        s = np.asarray(sigma, dtype=float)
        i = np.clip(np.searchsorted(self.sigma, s, side="right") - 1, 0, self.sigma.size - 2)
        x0, v0, v1 = self.sigma[i], self.values[i], self.values[i + 1]
        dx = np.clip(s - x0, 0.0, self.sigma[i + 1] - x0)
        slope = (v1 - v0) / (self.sigma[i + 1] - x0)
        out = np.where(s <= self.sigma[0], 0.0, np.minimum(self._cum[i] + v0 * dx + 0.5 * slope * dx * dx, 1.0))
        return float(out) if out.ndim == 0 else out

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        i = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, self.sigma.size - 2)
        x0 = self.sigma[i]
        h = self.sigma[i + 1] - x0
        v0 = self.values[i]
        slope = (self.values[i + 1] - v0) / h
        r = u - self._cum[i]
        # solve v0 dx + slope/2 dx^2 = r with the cancellation-free root
        disc = np.sqrt(np.maximum(v0 * v0 + 2.0 * slope * r, 0.0))
        denom = v0 + disc
        dx = np.where(denom > 0, 2.0 * r / np.where(denom > 0, denom, 1.0), 0.0)
        return x0 + np.clip(dx, 0.0, h)

    @property
    def support(self) -> tuple[float, float]:
        return (float(self.sigma[0]), float(self.sigma[-1]))

    @property
    def sup_norm(self) -> float:
        return float(self.values.max())

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.sigma)
