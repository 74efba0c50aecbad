"""Split-step finite-volume solver for the reinjection transport equation.

Each step applies the exact relaxation source above threshold, deposits the
relaxed mass in the cell centred at zero stress, then advects with first-order
upwinding on a periodic stress grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import CFLViolationError, ConfigurationError, GeometryError, InvariantViolationError
from .initial import InitialDensity
from .model import ModelParams, ShearProfile

logger = logging.getLogger(__name__)

MASS_TOL = 1e-10
TAIL_WARN = 1e-8
_UNIT_CFL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GridGeometry:
    """Cell layout with a cell centred at zero and cell faces at the thresholds.

    Attributes
    ----------
    dsigma : float
        Cell width.
    n_half : int
        Number of cells on each side of the zero cell.
    centers : ndarray
        Cell centres ``k * dsigma`` for ``k = -n_half .. n_half``.
    above : ndarray of bool
        Cells whose centre lies above the threshold in absolute value.
    """

    sigma_c: float
    dsigma: float
    n_half: int
    centers: np.ndarray
    above: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.centers.size

    @property
    def zero_index(self) -> int:
        return self.n_half

    @property
    def half_width(self) -> float:
        """Actual half-width of the periodic domain."""
        return (self.n_half + 0.5) * self.dsigma

    @classmethod
    def from_params(cls, params: ModelParams) -> "GridGeometry":
        """Lay out the grid closest to ``params.n_cells`` that honours the alignment."""
        if params.sigma_c >= params.m_sigma:
            raise GeometryError("sigma_c must be smaller than the domain half-width")
        target = params.dsigma
        # sigma_c = (j + 1/2) * dsigma puts the threshold on a cell face
        j = max(1, math.ceil(params.sigma_c / target - 0.5 - 1e-12))
        dsigma = params.sigma_c / (j + 0.5)
        n_half = int(round(params.m_sigma / dsigma - 0.5))
        if n_half <= j:
            raise GeometryError("domain too small to hold the threshold cells")
        centers = np.arange(-n_half, n_half + 1) * dsigma
        above = np.abs(np.arange(-n_half, n_half + 1)) > j
        geom = cls(params.sigma_c, dsigma, n_half, centers, above)
        if geom.n_cells != params.n_cells:
            logger.info(
                "grid adjusted from %d to %d cells (dsigma=%.6g, half-width %.6g)",
                params.n_cells, geom.n_cells, dsigma, geom.half_width,
            )
        return geom


@dataclass(frozen=True)
class Observables:
    """Moments of the grid density at one time."""

    t: float
    f: float
    tau: float
    beta: float
    mass: float
    min_value: float


@dataclass(frozen=True)
class TimeSeries:
    """Observables recorded along a run, in increasing time."""

    samples: tuple[Observables, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def f(self) -> np.ndarray:
        return self.column("f")

    @property
    def tau(self) -> np.ndarray:
        return self.column("tau")

    @property
    def final(self) -> Observables:
        return self.samples[-1]


@dataclass(frozen=True, eq=False)
class DensityField:
    """Grid density values at a given time."""

    geometry: GridGeometry
    values: np.ndarray
    t: float = 0.0

    @property
    def sigma(self) -> np.ndarray:
        return self.geometry.centers

    @property
    def mass(self) -> float:
        return float(self.geometry.dsigma * self.values.sum())


@dataclass(frozen=True)
class RunResult:
    """Output of :func:`run`."""

    series: TimeSeries
    field: DensityField
    n_steps: int
    tail_warned: bool


def init_grid(params: ModelParams, p0: InitialDensity | Callable) -> DensityField:
    """Sample an initial density at the cell centres and rescale it to unit mass."""
    geom = GridGeometry.from_params(params)
    pdf = p0.pdf if isinstance(p0, InitialDensity) else p0
    values = np.asarray(pdf(geom.centers), dtype=float).copy()
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ConfigurationError("initial density must be finite and nonnegative")
    total = geom.dsigma * values.sum()
    if total <= 0:
        raise ConfigurationError("initial density has no mass on the grid")
    values /= total
    return DensityField(geom, values, 0.0)


def observables(field: DensityField) -> Observables:
    """Fluidity, stress, tail moment, mass and minimum of a field."""
    g, p = field.geometry, field.values
    ds = g.dsigma
    return Observables(
        t=float(field.t),
        f=float(ds * p[g.above].sum()),
        tau=float(ds * np.dot(g.centers, p)),
        beta=float(ds * np.dot(g.centers[g.above], p[g.above])),
        mass=float(ds * p.sum()),
        min_value=float(p.min()),
    )


def _source_inplace(p: np.ndarray, geom: GridGeometry, dt: float) -> None:
    lost = -math.expm1(-dt)
    hot = p[geom.above]
    removed = lost * hot.sum()
    p[geom.above] = hot - lost * hot
    p[geom.zero_index] += removed


def _advect(p: np.ndarray, nu: float) -> np.ndarray:
    if abs(nu - 1.0) < _UNIT_CFL_TOL:
        return np.roll(p, 1)
    if nu == 0.0:
        return p
    # convex combination keeps the update nonnegative
    return (1.0 - nu) * p + nu * np.roll(p, 1)


def step(field: DensityField, dt: float, rate: float) -> DensityField:
    """One source step followed by one upwind advection step.

    Raises
    ------
    CFLViolationError
        If ``rate * dt / dsigma`` exceeds one.
    """
    if rate < 0:
        raise ConfigurationError("negative shear rates are not supported by the grid step")
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    nu = rate * dt / field.geometry.dsigma
    if nu > 1.0 + _UNIT_CFL_TOL:
        raise CFLViolationError(f"Courant number {nu:.6g} exceeds 1; sub-step the advection")
    p = field.values.copy()
    _source_inplace(p, field.geometry, dt)
    p = _advect(p, min(nu, 1.0))
    return DensityField(field.geometry, p, field.t + dt)


def _tail_mass(field: DensityField) -> float:
    g = field.geometry
    band = max(1, int(0.01 * g.n_cells))
    return float(g.dsigma * (field.values[:band].sum() + field.values[-band:].sum()))


def _check(obs: Observables) -> None:
    if not abs(obs.mass - 1.0) <= MASS_TOL:
        raise InvariantViolationError(f"mass drifted to {obs.mass!r} at t={obs.t:.6g}")
    if obs.min_value < 0:
        raise InvariantViolationError(f"negative density {obs.min_value!r} at t={obs.t:.6g}")
    if not (np.isfinite(obs.f) and np.isfinite(obs.tau)):
        raise InvariantViolationError(f"non-finite observables at t={obs.t:.6g}")


def run(
    params: ModelParams,
    p0: InitialDensity | Callable | DensityField,
    profile: ShearProfile,
    stride: float | None = None,
    *,
    stepping: str = "aligned",
    dt: float | None = None,
    monitor: Callable[[DensityField], None] | None = None,
) -> RunResult:
    """Advance the density from ``t = 0`` to ``params.t_end``.

    Parameters
    ----------
    params : ModelParams
        Grid and horizon.
    p0 : InitialDensity, callable or DensityField
        Initial datum; a field is used as is.
    profile : ShearProfile
        Driving shear rate.
    stride : float, optional
        Sampling interval for the observables; defaults to ``t_end / 200``.
    stepping : {"aligned", "fixed"}
        ``"aligned"`` chooses each step so the accumulated shear advances by
        exactly one cell, making advection an exact shift. ``"fixed"`` uses a
        constant outer step ``dt`` with the rate frozen at the step start and
        advection sub-stepped to keep the Courant number at most one.
    dt : float, optional
        Outer step for ``"fixed"`` mode; defaults to ``params.dt``.
    monitor : callable, optional
        Called with the field after every step.

    Returns
    -------
    RunResult
    """
    field = p0 if isinstance(p0, DensityField) else init_grid(params, p0)
    geom = field.geometry
    ds = geom.dsigma
    t_end = float(params.t_end)
    stride = t_end / 200 if stride is None else float(stride)
    if stride <= 0:
        raise ConfigurationError("stride must be positive")
    if stepping not in ("aligned", "fixed"):
        raise ConfigurationError(f"unknown stepping mode {stepping!r}")

    p = field.values.copy()
    t = float(field.t)
    samples = [observables(DensityField(geom, p, t))]
    _check(samples[0])
    next_record = t + stride
    tail_warned = False
    n_steps = 0

    def record(t_now: float) -> None:
        nonlocal tail_warned
        f_now = DensityField(geom, p, t_now)
        obs = observables(f_now)
        _check(obs)
        samples.append(obs)
        if not tail_warned and _tail_mass(f_now) > TAIL_WARN:
            tail_warned = True
            logger.warning(
                "mass %.3e near the periodic boundary at t=%.4g; consider a wider domain",
                _tail_mass(f_now), t_now,
            )

    if stepping == "aligned":
        g0 = float(profile.accum(t))
        k = 0
        while t < t_end:
            g_next = g0 + (k + 1) * ds
            t_next = float(profile.inverse(g_next))
            if t_next >= t_end * (1 - 1e-14):
                nu = (float(profile.accum(t_end)) - (g0 + k * ds)) / ds
                t_next = t_end
                if abs(nu - 1.0) < 1e-9:
                    nu = 1.0
            else:
                nu = 1.0
            _source_inplace(p, geom, t_next - t)
            p = _advect(p, nu)
            t = t_next
            k += 1
            n_steps += 1
            if monitor is not None:
                monitor(DensityField(geom, p, t))
            if t >= next_record - 1e-12 or t >= t_end:
                record(t)
                while next_record <= t + 1e-12:
                    next_record += stride
    else:
        h = params.dt if dt is None else float(dt)
        n_outer = max(1, math.ceil(t_end / h - 1e-9))
        for n in range(n_outer):
            t_next = min(t_end, (n + 1) * h)
            dt_n = t_next - t
            rate = float(profile.rate(t))
            if rate < 0:
                raise ConfigurationError("negative shear rate encountered")
            nu_total = rate * dt_n / ds
            n_sub = max(1, math.ceil(nu_total - _UNIT_CFL_TOL))
            _source_inplace(p, geom, dt_n)
            for _ in range(n_sub):
                p = _advect(p, nu_total / n_sub)
            t = t_next
            n_steps += 1
            if monitor is not None:
                monitor(DensityField(geom, p, t))
            if t >= next_record - 1e-12 or n == n_outer - 1:
                record(t)
                while next_record <= t + 1e-12:
                    next_record += stride

    final = DensityField(geom, p, t)
    return RunResult(TimeSeries(tuple(samples)), final, n_steps, tail_warned)


def l2_distance(field: DensityField, reference) -> float:
    """Discrete L2 distance to a reference given as a function or as cell values."""
    ref = reference(field.sigma) if callable(reference) else np.asarray(reference, dtype=float)
    return float(np.sqrt(field.geometry.dsigma * np.sum((field.values - ref) ** 2)))


def l1_distance(field: DensityField, reference) -> float:
    """Discrete L1 distance to a reference given as a function or as cell values."""
    ref = reference(field.sigma) if callable(reference) else np.asarray(reference, dtype=float)
    return float(field.geometry.dsigma * np.sum(np.abs(field.values - ref)))


def discrete_stationary_state(geometry: GridGeometry, dt: float, rate: float) -> np.ndarray:
    """Exact fixed point of one constant-rate step of the scheme, with unit mass.

    Solves ``(I - S) p = 0`` for the sparse one-step operator ``S`` with one
    row replaced by the mass constraint.
    """
    nu = rate * dt / geometry.dsigma
    if nu > 1.0 + _UNIT_CFL_TOL or nu <= 0:
        raise CFLViolationError(f"Courant number {nu:.6g} outside (0, 1]")
    n = geometry.n_cells
    lost = -math.expm1(-dt)
    keep = np.where(geometry.above, 1.0 - lost, 1.0)
    weights = np.where(geometry.above, lost, 0.0)
    source = sp.diags(keep) + sp.csr_matrix(
        (weights[geometry.above], (np.full(int(geometry.above.sum()), geometry.zero_index),
                                   np.flatnonzero(geometry.above))),
        shape=(n, n),
    )
    shift = sp.diags([np.ones(n - 1)], [-1], shape=(n, n), format="lil")
    shift[0, n - 1] = 1.0
    nu = min(nu, 1.0)
    advect = (1.0 - nu) * sp.identity(n) + nu * shift.tocsr()
    system = (sp.identity(n) - advect @ source).tolil()
    system[0, :] = geometry.dsigma
    rhs = np.zeros(n)
    rhs[0] = 1.0
    p = spsolve(system.tocsr(), rhs)
    return np.maximum(p, 0.0)


def richardson(coarse: float, fine: float, ratio: float) -> float:
    """First-order Richardson extrapolation from step sizes ``h`` and ``h / ratio``."""
    if ratio <= 1:
        raise ConfigurationError("refinement ratio must exceed 1")
    return (ratio * fine - coarse) / (ratio - 1.0)
