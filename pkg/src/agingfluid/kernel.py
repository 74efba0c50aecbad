"""Delay-equation kernel, decay rates, and a validated linear delay solver.

The kernel ``k`` solves ``k' + k - k(t - delay) = 0`` with ``k = 0`` for
``t < 0`` and ``k(0) = 1``. It tends to ``1/(1 + delay)`` and the decaying
remainder is governed by the rightmost nonzero root of
``lambda + 1 - exp(-delay * lambda)``.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.signal import fftconvolve, lfilter

from .errors import ConfigurationError, DiscrepancyError, NoRootFoundError, ResolutionError

logger = logging.getLogger(__name__)

MIN_STEPS_PER_DELAY = 32


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Samples of the kernel on a uniform grid aligned with the delay.

    Attributes
    ----------
    omega : float
        Delay.
    t : ndarray
        Uniform grid starting at 0; ``omega`` is a grid point.
    k : ndarray
        Kernel samples.
    """

    omega: float
    t: np.ndarray
    k: np.ndarray

    @property
    def limit(self) -> float:
        return 1.0 / (1.0 + self.omega)

    @property
    def k1(self) -> np.ndarray:
        """Decaying part ``k - 1/(1 + omega)``."""
        return self.k - self.limit

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __call__(self, t):
        """Linear interpolation of the kernel (zero for negative times)."""
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0, 0.0, np.interp(t, self.t, self.k))
        return float(out) if out.ndim == 0 else out


def _exp_weights(h: float) -> tuple[float, float, float]:
    """Decay factor and product-trapezoid weights for ``int_0^h e^{-(h-s)} g(s) ds``.

    ``g`` is replaced by its linear interpolant, so the rule is exact for
    constants and the two weights sum to ``1 - e^{-h}``.
    """
    decay = math.exp(-h)
    w_right = (h - 1.0 + decay) / h if h > 1e-4 else h / 2 - h * h / 6 + h**3 / 24
    w_left = -math.expm1(-h) - w_right
    return decay, w_left, w_right


def _steps_per_delay(omega: float, dt: float) -> int:
    if not omega > 0:
        raise ConfigurationError(f"delay must be positive, got {omega}")
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    if dt > omega / MIN_STEPS_PER_DELAY * (1 + 1e-12):
        raise ResolutionError(
            f"dt={dt:.3g} too coarse: need at least {MIN_STEPS_PER_DELAY} steps per delay {omega:.3g}"
        )
    return int(math.ceil(omega / dt - 1e-9))


def _march(history: np.ndarray, forcing: np.ndarray, m: int, h: float) -> np.ndarray:
    """Method of steps for ``u' = -u + u(t - delay) + forcing`` on a grid with ``m`` steps per delay.

    ``history`` holds the ``m + 1`` samples on ``[0, delay]``; ``forcing`` holds
    samples on the whole grid (entries before the delay are ignored).
    """
    n = forcing.size - 1
    u = np.empty(n + 1)
    u[: m + 1] = history
    decay, w0, w1 = _exp_weights(h)
    a = m
    while a < n:
        b = min(a + m, n)
        g = u[a - m : b - m + 1] + forcing[a : b + 1]
        drive = w0 * g[:-1] + w1 * g[1:]
        u[a + 1 : b + 1], _ = lfilter([1.0], [1.0, -decay], drive, zi=[decay * u[a]])
        a = b
    return u


def kernel_k(omega: float, t_end: float, dt: float | None = None) -> KernelTable:
    """Tabulate the delay kernel on ``[0, t_end]``.

    The first delay window holds the exact ``exp(-t)``; later windows follow
    the one-window variation-of-constants formula with the delayed term
    integrated by the product trapezoid rule.

    Parameters
    ----------
    omega : float
        Delay, positive.
    t_end : float
        Last time required.
    dt : float, optional
        Maximum grid step; must not exceed ``omega / 32``. Defaults to ``omega / 1024``.
    """
    dt = omega / 1024 if dt is None else dt
    m = _steps_per_delay(omega, dt)
    h = omega / m
    n = max(m, int(math.ceil(t_end / h - 1e-9)))
    t = np.arange(n + 1) * h
    history = np.exp(-t[: m + 1])
    k = _march(history, np.zeros(n + 1), m, h)
    return KernelTable(float(omega), t, k)


# ---------------------------------------------------------------------------
# Decay rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateEstimate:
    """Sharp and alternate decay rates for a given delay.

    Attributes
    ----------
    omega : float
        Delay.
    b : float
        Sharp rate, minus the real part of the rightmost nonzero root, minus ``eta``.
    b_tilde : float
        Conservative alternate rate.
    residual : float
        ``|F(root)|`` for the real scan function.
    eta : float
        Safety margin subtracted from the root.
    root : float
        Real part of the rightmost nonzero root.
    imag : float
        Imaginary part of that root.
    modulus_residual : float
        ``|exp(2 omega x)((x+1)^2 + beta^2) - 1|`` at the root.
    complex_residual : float
        ``|lambda + 1 - exp(-omega lambda)|`` at ``lambda = root + i imag``.
    """

    omega: float
    b: float
    b_tilde: float
    residual: float
    eta: float
    root: float
    imag: float
    modulus_residual: float
    complex_residual: float


@dataclass(frozen=True)
class AlternateRate:
    """Conservative decay rate and its prefactor."""

    b_tilde: float
    c0: float


def alternate_rate(omega: float) -> AlternateRate:
    """Conservative rate ``-log(1 - exp(-2 omega)) / (2 omega)`` and prefactor ``2 + omega``."""
    if not omega > 0:
        raise ConfigurationError("delay must be positive")
    b_tilde = -math.log1p(-math.exp(-2.0 * omega)) / (2.0 * omega)
    return AlternateRate(b_tilde=b_tilde, c0=2.0 + omega)


def _imag_part(x: float, omega: float) -> float:
    return math.sqrt(max(math.exp(-2.0 * omega * x) - (x + 1.0) ** 2, 0.0))


def scan_function(x, omega: float):
    """Real function whose largest negative zero is the real part of the rightmost root."""
    x = np.asarray(x, dtype=float)
    beta = np.sqrt(np.maximum(np.exp(-2.0 * omega * x) - (x + 1.0) ** 2, 0.0))
    return x + 1.0 - np.exp(-omega * x) * np.cos(omega * beta)


def characteristic(lam, omega: float):
    """``lambda + 1 - exp(-omega * lambda)`` for complex ``lambda``."""
    lam = np.asarray(lam, dtype=complex)
    return lam + 1.0 - np.exp(-omega * lam)


def sharp_rate_b(omega: float, eta: float = 0.0, *, n_scan: int = 20000) -> RateEstimate:
    """Sharp exponential decay rate of the kernel remainder.

    Scans the real function from ``-1e-6`` downward on a geometric grid,
    refines each sign change with Brent's method, and accepts the first root
    that is also a zero of the complex characteristic function. The scan
    function has extra zeros where only the modulus condition holds; the
    complex check rejects them.

    Raises
    ------
    NoRootFoundError
        If no admissible root lies in the scan range.
    """
    if not omega > 0:
        raise ConfigurationError("delay must be positive")
    if eta < 0:
        raise ConfigurationError("eta must be nonnegative")
    depth = min(max(10.0, 60.0 / omega), 300.0 / omega)
    xs = -np.geomspace(1e-6, depth, n_scan)
    vals = scan_function(xs, omega)
    signs = np.sign(vals)
    crossings = np.flatnonzero(signs[:-1] * signs[1:] < 0)
    for i in crossings:
        a, b = xs[i + 1], xs[i]
        root = brentq(lambda x: float(scan_function(x, omega)), a, b, xtol=1e-15, rtol=1e-15, maxiter=500)
        beta = _imag_part(root, omega)
        lam = complex(root, beta)
        c_res = abs(complex(characteristic(lam, omega)))
        scale = 1.0 + abs(cmath.exp(-omega * lam))
        if beta > 0 and c_res <= 1e-8 * scale:
            b_val = -root - eta
            if abs(b_val - 1.0) < 1e-6:
                logger.warning("sharp rate %.12g is within 1e-6 of 1", b_val)
            mod_res = abs(math.exp(2.0 * omega * root) * ((root + 1.0) ** 2 + beta**2) - 1.0)
            return RateEstimate(
                omega=float(omega),
                b=b_val,
                b_tilde=alternate_rate(omega).b_tilde,
                residual=abs(float(scan_function(root, omega))),
                eta=float(eta),
                root=root,
                imag=beta,
                modulus_residual=mod_res,
                complex_residual=c_res,
            )
    raise NoRootFoundError("no admissible root of the characteristic function", (-depth, -1e-6))


# ---------------------------------------------------------------------------
# Linear delay equation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DDESolution:
    """Solution of ``u' + u - u(t - omega) = mu`` for ``t > omega`` with ``u = nu`` on ``[0, omega]``.

    Attributes
    ----------
    t : ndarray
        Uniform grid.
    u : ndarray
        Solution from direct method-of-steps integration.
    u_convolution : ndarray
        Solution from the kernel representation.
    max_discrepancy : float
        Largest absolute difference between the two.
    """

    omega: float
    t: np.ndarray
    u: np.ndarray
    u_convolution: np.ndarray
    max_discrepancy: float


def _trapezoid_convolution(f: np.ndarray, k: np.ndarray, h: float, count: int) -> np.ndarray:
    """``h * trap(sum_j f_j k_{n-j})`` over ``j = 0 .. min(len(f)-1, n)`` for ``n < count``."""
    full = fftconvolve(f, k[:count])[:count]
    n = np.arange(count)
    last = np.minimum(f.size - 1, n)
    ends = 0.5 * (f[0] * k[n] + f[last] * k[n - last])
    return h * (full - ends)


def solve_dde(
    omega: float,
    nu: Callable,
    mu: Callable | None,
    t_end: float,
    dt: float | None = None,
    *,
    tol: float | None = 1e-6,
) -> DDESolution:
    """Solve the forced delay equation two ways and compare.

    Parameters
    ----------
    omega : float
        Delay.
    nu : callable
        Initial segment, evaluated on ``[0, omega]``.
    mu : callable or None
        Forcing on ``(omega, t_end]``; ``None`` means zero.
    t_end : float
        Horizon, at least ``omega``.
    dt : float, optional
        Grid step, at most ``omega / 32``; defaults to ``min(omega / 2048, 2.5e-4)``.
    tol : float or None
        Raise :class:`DiscrepancyError` when the two solutions differ by more.
    """
    dt = min(omega / 2048, 2.5e-4) if dt is None else dt
    m = _steps_per_delay(omega, dt)
    h = omega / m
    if t_end < omega:
        raise ConfigurationError("t_end must be at least the delay")
    n = int(math.ceil(t_end / h - 1e-9))
    t = np.arange(n + 1) * h
    history = np.asarray(nu(t[: m + 1]), dtype=float) * np.ones(m + 1)
    forcing = np.zeros(n + 1) if mu is None else np.asarray(mu(t), dtype=float) * np.ones(n + 1)
    forcing[:m] = 0.0

    u_step = _march(history, forcing, m, h)

    kern = _march(np.exp(-t[: m + 1]), np.zeros(n + 1), m, h)
    u_conv = u_step.copy()
    count = n - m + 1  # entries n' = 0 .. n-m correspond to t = omega + n' h
    u_conv[m:] = (
        history[m] * kern[:count]
        + _trapezoid_convolution(history, kern, h, count)
        + _trapezoid_convolution(forcing[m:], kern, h, count)
    )
    gap = float(np.max(np.abs(u_conv - u_step)))
    if tol is not None and gap > tol:
        raise DiscrepancyError(f"direct and kernel solutions differ by {gap:.3e} > {tol:.1e}")
    return DDESolution(float(omega), t, u_step, u_conv, gap)
