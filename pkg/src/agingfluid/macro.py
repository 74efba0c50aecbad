"""Slow-time closures for stress and fluidity under a slowly varying shear rate.

Three closures are integrated in the slow time ``theta``:

* ``mac1``: ``eps tau' = -tau + sigma_c^2 / (2 (sigma_c + rate)) + rate``
* ``mac2``: ``eps tau' = -kappa f tau + rate`` and ``eps f' = -f + rate / (sigma_c + rate)``
* ``macc``: ``mac2`` with ``kappa`` fixed at 2 (small-shear limit)

Steps are exponential with coefficients frozen at the step midpoint, which is
exact for frozen coefficients and second order otherwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

from .errors import ConfigurationError
from .model import ShearProfile, closure_kappa

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    MAC1 = "mac1"
    MAC2 = "mac2"
    MACC = "macc"


@dataclass(frozen=True, eq=False)
class MacroTrajectory:
    """Closure solution sampled at every slow-time step.

    ``f`` is ``None`` for the single-equation closure.
    """

    scheme: Scheme
    epsilon: float
    theta: np.ndarray
    tau: np.ndarray
    f: np.ndarray | None

    @property
    def final_tau(self) -> float:
        return float(self.tau[-1])

    @property
    def final_f(self) -> float | None:
        return None if self.f is None else float(self.f[-1])


def _phi1(z: float) -> float:
    """``(e^z - 1)/z`` with the removable singularity at 0."""
    return math.expm1(z) / z if abs(z) > 1e-12 else 1.0 + 0.5 * z


def _validate(epsilon: float, theta_end: float, dtheta: float | None) -> tuple[int, float]:
    if not epsilon > 0:
        raise ConfigurationError("epsilon must be positive")
    if not theta_end > 0:
        raise ConfigurationError("theta_end must be positive")
    dtheta = theta_end / 1e4 if dtheta is None else dtheta
    if not dtheta > 0:
        raise ConfigurationError("dtheta must be positive")
    n = max(1, int(math.ceil(theta_end / dtheta - 1e-9)))
    return n, theta_end / n


def mac1_forcing(rate, sigma_c: float):
    """Equilibrium stress of the single-equation closure for a frozen rate."""
    rate = np.asarray(rate, dtype=float)
    return sigma_c * sigma_c / (2.0 * (sigma_c + rate)) + rate


def integrate_mac1(
    epsilon: float,
    profile: ShearProfile,
    tau0: float = 0.0,
    theta_end: float = 1.0,
    dtheta: float | None = None,
    *,
    sigma_c: float = 2.0,
) -> MacroTrajectory:
    """Integrate the single stress equation in slow time.

    Parameters
    ----------
    epsilon : float
        Time-scale separation.
    profile : ShearProfile
        Shear rate as a function of slow time.
    tau0 : float
        Initial stress.
    theta_end : float
        Final slow time.
    dtheta : float, optional
        Step; defaults to ``theta_end / 1e4``. May exceed ``epsilon``.
    """
    n, h = _validate(epsilon, theta_end, dtheta)
    theta = np.arange(n + 1) * h
    tau = np.empty(n + 1)
    tau[0] = tau0
    decay = math.exp(-h / epsilon)
    forcing = mac1_forcing(profile.rate(theta[:-1] + 0.5 * h), sigma_c)
    for i in range(n):
        tau[i + 1] = decay * tau[i] + (1.0 - decay) * forcing[i]
    return MacroTrajectory(Scheme.MAC1, float(epsilon), theta, tau, None)


def integrate_mac2(
    epsilon: float,
    profile: ShearProfile,
    tau0: float = 0.0,
    f0: float = 0.0,
    theta_end: float = 1.0,
    dtheta: float | None = None,
    *,
    sigma_c: float = 2.0,
    kappa_mode: str | Scheme = Scheme.MAC2,
) -> MacroTrajectory:
    """Integrate the coupled fluidity and stress closure.

    ``kappa_mode`` selects the rate-dependent coefficient (``"mac2"``) or the
    constant 2 (``"macc"``). Per step, ``f`` takes an exact exponential step
    toward its midpoint target; ``tau`` then takes an exponential step with
    the decay coefficient frozen at the midpoint.
    """
    scheme = Scheme(kappa_mode)
    if scheme is Scheme.MAC1:
        raise ConfigurationError("use integrate_mac1 for the single-equation closure")
    if f0 < 0:
        raise ConfigurationError("f0 must be nonnegative")
    n, h = _validate(epsilon, theta_end, dtheta)
    theta = np.arange(n + 1) * h
    tau = np.empty(n + 1)
    f = np.empty(n + 1)
    tau[0], f[0] = tau0, f0
    mid_rate = np.asarray(profile.rate(theta[:-1] + 0.5 * h), dtype=float)
    target = mid_rate / (sigma_c + mid_rate)
    kappa = np.full(n, 2.0) if scheme is Scheme.MACC else np.asarray(closure_kappa(mid_rate, sigma_c))
    full = math.exp(-h / epsilon)
    half = math.exp(-0.5 * h / epsilon)
    for i in range(n):
        f_mid = half * f[i] + (1.0 - half) * target[i]
        f[i + 1] = full * f[i] + (1.0 - full) * target[i]
        lam = kappa[i] * f_mid / epsilon
        z = -lam * h
        tau[i + 1] = math.exp(z) * tau[i] + h * _phi1(z) * mid_rate[i] / epsilon
    return MacroTrajectory(scheme, float(epsilon), theta, tau, f)


def duhamel_fluidity(
    theta,
    epsilon: float,
    profile: ShearProfile,
    f0: float = 0.0,
    *,
    sigma_c: float = 2.0,
    by_parts: bool = True,
):
    """Closed-form fluidity of the coupled closure.

    With ``F = rate / (sigma_c + rate)`` the solution is
    ``f0 e^{-theta/eps} + (1/eps) int_0^theta F(v) e^{(v-theta)/eps} dv``.
    The integration-by-parts form
    ``F(theta) - F(0) e^{-theta/eps} - int_0^theta F'(v) e^{(v-theta)/eps} dv``
    isolates the slowly varying part; the remaining integral is evaluated by
    adaptive quadrature.
    """
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))

    def target(v):
        r = profile.rate(v)
        return r / (sigma_c + r)

    def target_prime(v):
        r = profile.rate(v)
        return sigma_c * profile.rate_derivative(v) / (sigma_c + r) ** 2

    out = np.empty_like(theta_arr)
    for i, th in enumerate(theta_arr):
        if by_parts:
            integral, _ = integrate.quad(
                lambda v: target_prime(v) * math.exp((v - th) / epsilon), 0.0, th,
                epsabs=1e-13, epsrel=1e-12, limit=200,
            )
            out[i] = f0 * math.exp(-th / epsilon) + target(th) - target(0.0) * math.exp(-th / epsilon) - integral
        else:
            integral, _ = integrate.quad(
                lambda v: target(v) * math.exp((v - th) / epsilon), 0.0, th,
                epsabs=1e-13, epsrel=1e-12, limit=200,
            )
            out[i] = f0 * math.exp(-th / epsilon) + integral / epsilon
    return float(out[0]) if np.ndim(theta) == 0 else out
