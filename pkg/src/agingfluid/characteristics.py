"""Semi-analytic solution of the reinjection transport equation.

The density splits into the initial datum carried along characteristics and
damped by the time spent above threshold, plus mass re-emitted at zero stress
at the rate ``phi(t)``. The rate ``phi`` solves a renewal equation that is
filled in forward in time from the direct contribution ``A(t)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateShearError, InvariantViolationError, QuadratureError, ResolutionError
from .initial import InitialDensity
from .model import ShearProfile, occupation_parts

logger = logging.getLogger(__name__)

MIN_WINDOW_SAMPLES = 16

_gl_x, _gl_w = np.polynomial.legendre.leggauss(4)
# Gauss-Legendre nodes and weights on [0, 1] for the memory integral
_MEMORY_RULE = (0.5 * (_gl_x + 1.0), 0.5 * _gl_w)


_GL_LO = np.polynomial.legendre.leggauss(8)
_GL_HI = np.polynomial.legendre.leggauss(16)


def _gauss(func, a: np.ndarray, b: np.ndarray, rule) -> np.ndarray:
    x, w = rule
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * x[None, :]
    return half * (func(pts.ravel()).reshape(pts.shape) @ w)


def _panel_quad(func, edges, tol: float, what: str, max_rounds: int = 40) -> float:
    """Adaptive Gauss-Legendre over panels delimited by known breakpoints.

    ``func`` must be vectorised. Each panel is integrated with 8 and 16 nodes;
    panels whose two estimates differ by more than their share of ``tol`` are
    halved until they agree.
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    a, b = edges[:-1], edges[1:]
    total, err_total = 0.0, 0.0
    for _ in range(max_rounds):
        if a.size == 0:
            return total
        lo = _gauss(func, a, b, _GL_LO)
        hi = _gauss(func, a, b, _GL_HI)
        err = np.abs(hi - lo)
        share = tol * (b - a) / max(edges[-1] - edges[0], 1e-300)
        done = err <= np.maximum(share, 1e-15)
        total += float(hi[done].sum())
        err_total += float(err[done].sum())
        mid = 0.5 * (a + b)
        a, b = np.concatenate([a[~done], mid[~done]]), np.concatenate([mid[~done], b[~done]])
    raise QuadratureError(f"{what} did not converge", err_total + float(np.abs(hi - lo).sum()))


def _transport_weight(profile: ShearProfile, t: float, sigma, sigma_c: float):
    below, above = occupation_parts(profile, t, sigma, sigma_c)
    return np.exp(-(np.asarray(below) + np.asarray(above)))


def compute_A(
    t: float,
    p0: InitialDensity,
    profile: ShearProfile,
    sigma_c: float,
    tol: float = 1e-9,
) -> float:
    """Fluidity carried directly by the initial datum at time ``t``.

    Integrates ``p0(xi) exp(-Z(t, xi + gamma(t)))`` over the initial stresses
    ``xi`` that sit above threshold at time ``t``, by adaptive Gauss-Legendre
    panels split at every point where the integrand loses smoothness.
    """
    g = float(profile.accum(t))
    lo, hi = p0.support
    kinks = np.array([-sigma_c - g, sigma_c - g, -sigma_c, sigma_c, *p0.breakpoints])

    def integrand(xi):
        return np.asarray(p0.pdf(xi)) * _transport_weight(profile, t, xi + g, sigma_c)

    value = 0.0
    for a, b in ((lo, min(hi, -sigma_c - g)), (max(lo, sigma_c - g), hi)):
        if b > a:
            value += _panel_quad(integrand, np.clip(np.concatenate([kinks, [a, b]]), a, b), tol, "A(t)")
    if value < -tol or value > 1.0 + tol:
        raise InvariantViolationError(f"A({t}) = {value} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


@dataclass(frozen=True, eq=False)
class PhiTable:
    """Re-emission rate on a uniform time grid, with the data that produced it."""

    t: np.ndarray
    phi: np.ndarray
    direct: np.ndarray
    p0: InitialDensity
    profile: ShearProfile
    sigma_c: float

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __call__(self, s):
        """Linear interpolation of the rate."""
        out = np.interp(s, self.t, self.phi)
        return float(out) if np.ndim(out) == 0 else out


def default_phi_step(profile: ShearProfile, sigma_c: float) -> float:
    """``min(first window / 64, 1e-2)``."""
    return min(float(profile.inverse(sigma_c)) / 64.0, 1e-2)


def compute_phi(
    t_end: float,
    p0: InitialDensity,
    profile: ShearProfile,
    sigma_c: float,
    dt: float | None = None,
    *,
    tol: float = 1e-9,
) -> PhiTable:
    """Fill the re-emission rate on ``[0, t_end]``.

    On the first window (before anything reaches threshold from zero) the rate
    equals the direct part. Afterwards it adds the memory integral over earlier
    re-emissions that have since crossed the threshold. The stored samples are
    joined linearly (the same interpolant :func:`evaluate_p` uses) and each
    panel of the memory integral is integrated against the exact survival
    weight with 4-point Gauss-Legendre, so the table and the reconstructed
    density share one quadrature.

    Raises
    ------
    DegenerateShearError
        If the profile's rate has no positive lower bound.
    ResolutionError
        If a window between successive threshold crossings holds fewer than 16 steps.
    """
    if not profile.lower_bound > 0:
        raise DegenerateShearError("the renewal solution needs a positive lower bound on the rate")
    dt = default_phi_step(profile, sigma_c) if dt is None else float(dt)
    shortest_window = sigma_c / profile.upper_bound(t_end)
    if shortest_window < MIN_WINDOW_SAMPLES * dt * (1 - 1e-12):
        raise ResolutionError(
            f"step {dt:.3g} leaves fewer than {MIN_WINDOW_SAMPLES} samples in a window of {shortest_window:.3g}"
        )
    n = int(math.ceil(t_end / dt - 1e-9))
    t = np.arange(n + 1) * dt
    g = np.asarray(profile.accum(t), dtype=float)
    x_q, w_q = _MEMORY_RULE
    # arrival time at +sigma_c of elements emitted at the quadrature nodes of each panel
    nodes = t[:-1, None] + dt * x_q[None, :]
    arrival = np.asarray(profile.inverse(np.asarray(profile.accum(nodes)) + sigma_c), dtype=float)
    direct = np.array([compute_A(float(tj), p0, profile, sigma_c, tol) for tj in t])
    phi = np.empty(n + 1)
    for j in range(n + 1):
        if g[j] <= sigma_c:
            phi[j] = direct[j]
            continue
        s_star = float(profile.inverse(g[j] - sigma_c))
        i = min(int(math.floor(s_star / dt + 1e-12)), j - 1)
        memory = 0.0
        if i > 0:
            lin = (1.0 - x_q)[None, :] * phi[:i, None] + x_q[None, :] * phi[1 : i + 1, None]
            memory = dt * float(np.sum(lin * np.exp(arrival[:i] - t[j]) @ w_q))
        frac = s_star - t[i]
        if frac > 0:
            s_nodes = t[i] + frac * x_q
            lin = phi[i] + (s_nodes - t[i]) / dt * (phi[i + 1] - phi[i])
            arr = np.asarray(profile.inverse(np.asarray(profile.accum(s_nodes)) + sigma_c), dtype=float)
            memory += frac * float(np.dot(lin * np.exp(arr - t[j]), w_q))
        phi[j] = direct[j] + memory
    if phi.min() < -1e-9 or phi.max() > 1.0 + 1e-6:
        raise InvariantViolationError(
            f"re-emission rate left [0, 1]: min {phi.min():.3e}, max {phi.max():.6f}"
        )
    return PhiTable(t, phi, direct, p0, profile, float(sigma_c))


def evaluate_p(t: float, sigma, table: PhiTable):
    """Density at time ``t`` from the two-term characteristic formula."""
    if t < 0 or t > table.t[-1] * (1 + 1e-12):
        raise ResolutionError(f"t={t} outside the tabulated range [0, {table.t[-1]}]")
    prof, p0, sc = table.profile, table.p0, table.sigma_c
    sigma = np.asarray(sigma, dtype=float)
    g = float(prof.accum(t))
    below, above = occupation_parts(prof, t, sigma, sc)
    transported = np.asarray(p0.pdf(sigma - g)) * np.exp(-(np.asarray(below) + np.asarray(above)))
    inside = (sigma > 0) & (sigma < g)
    birth = np.asarray(prof.inverse(np.clip(g - sigma, 0.0, g)), dtype=float)
    rate_at_birth = np.asarray(prof.rate(birth), dtype=float)
    emitted = np.where(
        inside, table(birth) / np.where(inside, rate_at_birth, 1.0) * np.exp(-np.asarray(above)), 0.0
    )
    out = transported + emitted
    return float(out) if out.ndim == 0 else out


def _density_kinks(t: float, table: PhiTable) -> np.ndarray:
    prof = table.profile
    g = float(prof.accum(t))
    sc = table.sigma_c
    lo, hi = table.p0.support
    pts = [0.0, -sc, sc, g, g - sc, g + sc, lo + g, hi + g]
    pts += [b + g for b in table.p0.breakpoints]
    # the interpolated rate has a kink at every table node; map them to stresses
    nodes = table.t[table.t < t]
    pts += list(g - np.asarray(prof.accum(nodes), dtype=float))
    return np.asarray(pts, dtype=float)


def _density_range(t: float, table: PhiTable) -> tuple[float, float]:
    g = float(table.profile.accum(t))
    lo, hi = table.p0.support
    return min(lo + g, 0.0), max(hi + g, g)


@dataclass(frozen=True)
class FluidityCheck:
    """Fluidity from the reconstructed density compared with the tabulated rate."""

    t: float
    integral: float
    phi: float
    gap: float


def fluidity_of_density(t: float, table: PhiTable, tol: float = 1e-9) -> FluidityCheck:
    """Integrate the above-threshold part of the reconstructed density."""
    a, b = _density_range(t, table)
    sc = table.sigma_c
    pts = _density_kinks(t, table)

    def integrand(s):
        return np.where(np.abs(s) > sc, evaluate_p(t, s, table), 0.0)

    edges = np.clip(np.concatenate([pts, [a, b]]), a, b)
    value = _panel_quad(integrand, edges, tol, "fluidity")
    phi_t = float(table(t))
    return FluidityCheck(float(t), value, phi_t, abs(value - phi_t))


def density_mass(t: float, table: PhiTable, tol: float = 1e-9) -> float:
    """Total mass of the reconstructed density at time ``t``."""
    a, b = _density_range(t, table)
    edges = np.clip(np.concatenate([_density_kinks(t, table), [a, b]]), a, b)
    return _panel_quad(lambda s: evaluate_p(t, s, table), edges, tol, "mass")


def direct_rate_identity(t, p0: InitialDensity, profile: ShearProfile, sigma_c: float):
    """``A'(t) + A(t)`` from the boundary fluxes of the transported datum at the thresholds."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    for i, tt in enumerate(t):
        g = float(profile.accum(tt))
        up = float(p0.pdf(sigma_c - g)) * float(_transport_weight(profile, tt, sigma_c, sigma_c))
        down = float(p0.pdf(-sigma_c - g)) * float(_transport_weight(profile, tt, -sigma_c, sigma_c))
        out[i] = float(profile.rate(tt)) * (up - down)
    return out


def renewal_residual(table: PhiTable) -> tuple[np.ndarray, np.ndarray]:
    """Residual of the delay form of the renewal equation, by centred differences.

    Returns the interior times after the first threshold crossing (excluding
    the first step past it) and the residual
    ``phi' + phi - (rate(t) / rate(s)) phi(s) - (A' + A)`` with ``s`` the
    emission time of elements crossing the threshold at ``t``.
    """
    prof, sc = table.profile, table.sigma_c
    t, phi, h = table.t, table.phi, table.dt
    t_first = float(prof.inverse(sc))
    idx = np.flatnonzero((t > t_first + 2 * h) & (np.arange(t.size) > 0) & (np.arange(t.size) < t.size - 1))
    tt = t[idx]
    dphi = (phi[idx + 1] - phi[idx - 1]) / (2 * h)
    s = np.asarray(prof.inverse(np.asarray(prof.accum(tt)) - sc), dtype=float)
    delayed = np.asarray(prof.rate(tt)) / np.asarray(prof.rate(s)) * table(s)
    forcing = direct_rate_identity(tt, table.p0, prof, sc)
    return tt, dphi + phi[idx] - delayed - forcing
