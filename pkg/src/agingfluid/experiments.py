"""Convergence studies: decay rate under constant shear, slow-ramp closures, and
the three-way solver comparison.

Each study writes comma-separated files with a header line and floats printed
with 17 significant digits, so reruns with the same configuration are
byte-identical.
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import grid
from .characteristics import compute_phi, evaluate_p
from .errors import AgingFluidError, ConfigurationError
from .fitting import FitResult, fit_envelope_rate, fit_loglog_slope
from .initial import TruncatedGaussian, UniformInterval
from .kernel import alternate_rate, sharp_rate_b
from .macro import integrate_mac1, integrate_mac2
from .model import Constant, LinearRamp, ModelParams, TimeScaled, stationary_density, steady_observables
from .pdmp import PdmpConfig, estimate

logger = logging.getLogger(__name__)

RATES_HEADER = ("gamma_inf", "omega", "fitted_rate", "sharp_b", "alternate_b", "fit_residual")
EPS_HEADER = ("epsilon", "f_gap", "tau_gap", "mac1_tau_gap", "mac2_tau_gap", "mac2_f_gap")
SMALLSHEAR_HEADER = EPS_HEADER + ("macc_tau_gap", "mac2_macc_rel_gap")
SLOPES_HEADER = ("quantity", "slope", "residual", "n_points")

DESK_GAMMAS = (0.2, 0.4, 0.6, 0.8)
PAPER_GAMMAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
DESK_EPSILONS = (0.05, 0.025, 0.0125, 0.00625)
PAPER_EPSILONS = (0.05, 0.04, 0.03, 0.02, 0.01, 0.005)
PAPER_DSIGMA = 5e-5


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write rows with a header; floats get 17 significant digits."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one study.

    Attributes
    ----------
    tag : str
        ``"i"``, ``"ii"``, ``"iii"`` or ``"custom"``.
    params : ModelParams
        Grid and threshold; ``t_end`` is the horizon for study i.
    gammas : tuple of float
        Constant shear rates for study i.
    epsilons : tuple of float
        Time-scale separations for studies ii and iii.
    ramp_slope : float
        Slope of the slow-time shear ramp.
    theta_end : float
        Slow time at which gaps are measured.
    refine : bool
        Extrapolate kinetic values from two grids (cell sizes h and about h/2).
    fit_start_factor : float
        Rate fits start at ``min(factor * omega, t_end / 2)``.
    out_dir : Path
        Where CSV files go.
    jobs : int
        Maximum concurrent sweep members.
    """

    tag: str
    params: ModelParams
    gammas: tuple[float, ...] = DESK_GAMMAS
    epsilons: tuple[float, ...] = DESK_EPSILONS
    ramp_slope: float = 1.0
    theta_end: float = 1.0
    refine: bool = True
    fit_start_factor: float = 5.0
    out_dir: Path = field(default_factory=lambda: Path("results"))
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.tag not in ("i", "ii", "iii", "custom"):
            raise ConfigurationError(f"unknown experiment tag {self.tag!r}")
        if not self.gammas or not self.epsilons:
            raise ConfigurationError("parameter lists must be non-empty")
        if any(g <= 0 for g in self.gammas) or any(e <= 0 for e in self.epsilons):
            raise ConfigurationError("rates and epsilons must be positive")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be at least 1")


def default_config(tag: str, *, paper_scale: bool = False, out_dir: Path | str = "results") -> ExperimentConfig:
    """Desk-scale (or full-scale) defaults for each study."""
    tag = tag.lower()
    if tag == "i":
        m = 10.0
        n = int(round(2 * m / PAPER_DSIGMA)) if paper_scale else 4000
        return ExperimentConfig(
            "i", ModelParams(sigma_c=2.0, m_sigma=m, n_cells=n, t_end=40.0),
            gammas=PAPER_GAMMAS if paper_scale else DESK_GAMMAS, out_dir=Path(out_dir),
        )
    if tag in ("ii", "iii"):
        m = 20.0
        n = int(round(2 * m / PAPER_DSIGMA)) if paper_scale else 8000
        return ExperimentConfig(
            tag, ModelParams(sigma_c=2.0, m_sigma=m, n_cells=n, t_end=1.0),
            epsilons=PAPER_EPSILONS if paper_scale else DESK_EPSILONS,
            ramp_slope=1.0 if tag == "ii" else 0.01, out_dir=Path(out_dir),
        )
    raise ConfigurationError(f"no defaults for experiment {tag!r}")


@dataclass(frozen=True)
class ExperimentSummary:
    """Rows written, fitted quantities and any failed sweep members."""

    tag: str
    rows: tuple[dict, ...]
    fits: dict[str, FitResult]
    files: tuple[Path, ...]
    failures: tuple[tuple[float, str], ...]


def _map(func, items: Sequence, jobs: int) -> list:
    """Apply ``func`` to each item, returning results or exceptions in order."""

    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
            futures = [pool.submit(func, *item) for item in items]
            out = []
            for fut in futures:
                try:
                    out.append(fut.result())
                except AgingFluidError as exc:
                    out.append(exc)
            return out
    out = []
    for item in items:
        try:
            out.append(func(*item))
        except AgingFluidError as exc:
            out.append(exc)
    return out


# ---------------------------------------------------------------------------
# Study i: decay rate under constant shear
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecayRun:
    """Distance-to-equilibrium history for one constant shear rate."""

    gamma_inf: float
    t: np.ndarray
    l2_discrete: np.ndarray
    l2_continuum: np.ndarray
    omega: float
    fit: FitResult
    sharp_b: float
    alternate_b: float


def decay_run(params: ModelParams, gamma_inf: float, fit_start_factor: float = 5.0) -> DecayRun:
    """Grid run from the Gaussian datum; L2 distance to the scheme's own equilibrium and to the continuum one.

    The rate is fitted on the envelope of the distance to the discrete
    equilibrium, which has no resolution floor.
    """
    profile = Constant(gamma_inf)
    geom = grid.GridGeometry.from_params(params)
    dt = geom.dsigma / gamma_inf
    ref_discrete = grid.discrete_stationary_state(geom, dt, gamma_inf)
    ref_continuum = stationary_density(geom.centers, gamma_inf, params.sigma_c)
    init = grid.init_grid(params, TruncatedGaussian(params.m_sigma))
    times, d_disc, d_cont = [0.0], [grid.l2_distance(init, ref_discrete)], [grid.l2_distance(init, ref_continuum)]

    def monitor(fld: grid.DensityField) -> None:
        times.append(fld.t)
        d_disc.append(grid.l2_distance(fld, ref_discrete))
        d_cont.append(grid.l2_distance(fld, ref_continuum))

    grid.run(params, init, profile, stride=params.t_end / 40, monitor=monitor)
    t = np.asarray(times)
    y = np.asarray(d_disc)
    omega = params.sigma_c / gamma_inf
    start = min(fit_start_factor * omega, 0.5 * params.t_end)
    fit = fit_envelope_rate(t, y, start, floor=100 * np.finfo(float).eps)
    rate = sharp_rate_b(omega)
    return DecayRun(gamma_inf, t, y, np.asarray(d_cont), omega, fit, rate.b, alternate_rate(omega).b_tilde)


def _study_i(config: ExperimentConfig) -> ExperimentSummary:
    out = Path(config.out_dir)
    results = _map(decay_run, [(config.params, g, config.fit_start_factor) for g in config.gammas], config.jobs)
    rows, failures, series_rows = [], [], []
    for g, res in zip(config.gammas, results):
        if isinstance(res, Exception):
            logger.error("rate %.4g failed: %s", g, res)
            failures.append((g, str(res)))
            continue
        rows.append(
            dict(gamma_inf=g, omega=res.omega, fitted_rate=res.fit.value, sharp_b=res.sharp_b,
                 alternate_b=res.alternate_b, fit_residual=res.fit.residual)
        )
        series_rows.extend((g, ti, a, b) for ti, a, b in zip(res.t, res.l2_discrete, res.l2_continuum))
    files = [
        write_csv(out / "rates.csv", RATES_HEADER, [[r[k] for k in RATES_HEADER] for r in rows]),
        write_csv(out / "l2_series.csv", ("gamma_inf", "t", "l2_discrete", "l2_continuum"), series_rows),
    ]
    return ExperimentSummary("i", tuple(rows), {}, tuple(files), tuple(failures))


# ---------------------------------------------------------------------------
# Studies ii and iii: slow shear ramp
# ---------------------------------------------------------------------------


def kinetic_at_theta(params: ModelParams, ramp_slope: float, epsilon: float, theta_end: float) -> tuple[float, float, float]:
    """Fluidity and stress of the grid solution at slow time ``theta_end``.

    Returns ``(f, tau, dsigma)``.
    """
    profile = TimeScaled(LinearRamp(ramp_slope), epsilon)
    run_params = replace(params, t_end=theta_end / epsilon)
    res = grid.run(run_params, TruncatedGaussian(params.m_sigma), profile, stride=run_params.t_end / 20)
    return res.series.final.f, res.series.final.tau, res.field.geometry.dsigma


def refined_kinetic(params: ModelParams, ramp_slope: float, epsilon: float, theta_end: float, refine: bool):
    """Kinetic ``(f, tau)`` at ``theta_end``, Richardson-extrapolated over two grids when ``refine``."""
    f1, tau1, h1 = kinetic_at_theta(params, ramp_slope, epsilon, theta_end)
    if not refine:
        return f1, tau1
    fine = replace(params, n_cells=2 * params.n_cells)
    f2, tau2, h2 = kinetic_at_theta(fine, ramp_slope, epsilon, theta_end)
    ratio = h1 / h2
    return grid.richardson(f1, f2, ratio), grid.richardson(tau1, tau2, ratio)


def ramp_gaps(params: ModelParams, ramp_slope: float, epsilon: float, theta_end: float, refine: bool) -> dict:
    """Kinetic-vs-closure gaps at ``theta_end`` for one epsilon."""
    f_kin, tau_kin = refined_kinetic(params, ramp_slope, epsilon, theta_end, refine)
    sc = params.sigma_c
    slow = LinearRamp(ramp_slope)
    steady = steady_observables(ramp_slope * theta_end, sc)
    dtheta = theta_end / 1e4
    m1 = integrate_mac1(epsilon, slow, 0.0, theta_end, dtheta, sigma_c=sc)
    m2 = integrate_mac2(epsilon, slow, 0.0, 0.0, theta_end, dtheta, sigma_c=sc, kappa_mode="mac2")
    mc = integrate_mac2(epsilon, slow, 0.0, 0.0, theta_end, dtheta, sigma_c=sc, kappa_mode="macc")
    return dict(
        epsilon=epsilon,
        f_kinetic=f_kin,
        tau_kinetic=tau_kin,
        f_gap=abs(f_kin - steady.f_inf),
        tau_gap=abs(tau_kin - steady.tau_inf),
        mac1_tau_gap=abs(tau_kin - m1.final_tau),
        mac2_tau_gap=abs(tau_kin - m2.final_tau),
        mac2_f_gap=abs(f_kin - m2.final_f),
        macc_tau_gap=abs(tau_kin - mc.final_tau),
        mac2_macc_rel_gap=abs(m2.final_tau - mc.final_tau) / abs(mc.final_tau),
    )


def _study_ramp(config: ExperimentConfig) -> ExperimentSummary:
    out = Path(config.out_dir)
    items = [(config.params, config.ramp_slope, e, config.theta_end, config.refine) for e in config.epsilons]
    results = _map(ramp_gaps, items, config.jobs)
    rows, failures = [], []
    for e, res in zip(config.epsilons, results):
        if isinstance(res, Exception):
            logger.error("epsilon %.4g failed: %s", e, res)
            failures.append((e, str(res)))
        else:
            rows.append(res)
    quantities = list(EPS_HEADER[1:]) + (["macc_tau_gap"] if config.tag == "iii" else [])
    fits: dict[str, FitResult] = {}
    for q in quantities:
        try:
            fits[q] = fit_loglog_slope([r["epsilon"] for r in rows], [r[q] for r in rows])
        except AgingFluidError as exc:
            logger.error("slope fit for %s failed: %s", q, exc)
    header = SMALLSHEAR_HEADER if config.tag == "iii" else EPS_HEADER
    name = "smallshear.csv" if config.tag == "iii" else "eps_convergence.csv"
    files = [
        write_csv(out / name, header, [[r[k] for k in header] for r in rows]),
        write_csv(
            out / "slopes.csv", SLOPES_HEADER,
            [[q, f.value, f.residual, f.n_points] for q, f in fits.items()],
        ),
    ]
    return ExperimentSummary(config.tag, tuple(rows), fits, tuple(files), tuple(failures))


def run_experiment(config: ExperimentConfig) -> ExperimentSummary:
    """Run a study and write its CSV files into ``config.out_dir``."""
    logger.info("experiment %s -> %s", config.tag, os.fspath(config.out_dir))
    if config.tag == "i":
        return _study_i(config)
    if config.tag in ("ii", "iii"):
        return _study_ramp(config)
    raise ConfigurationError("custom experiments are driven through the individual subcommands")


# ---------------------------------------------------------------------------
# Three-way comparison
# ---------------------------------------------------------------------------

COMPARE_HEADER = ("check", "value", "tolerance", "passed")


@dataclass(frozen=True)
class ComparisonReport:
    """Grid vs characteristics vs Monte Carlo on a common configuration."""

    l1_gap: float
    l1_gap_fine: float
    l1_ratio: float
    f_grid: float
    tau_grid: float
    f_mc: float
    f_se: float
    tau_mc: float
    tau_se: float
    checks: tuple[tuple[str, float, str, bool], ...]

    @property
    def passed(self) -> bool:
        return all(c[3] for c in self.checks)


def three_way_comparison(
    params: ModelParams | None = None,
    *,
    rate: float = 1.0,
    n_paths: int = 100_000,
    seed: int = 20240607,
    gap_tol: float = 2e-2,
    ratio_band: tuple[float, float] = (1.6, 2.6),
    n_se: float = 3.0,
    jobs: int = 1,
) -> ComparisonReport:
    """Uniform datum on ``(0, 2)`` under constant shear, compared at ``params.t_end``."""
    params = params or ModelParams(sigma_c=2.0, m_sigma=10.0, n_cells=4000, t_end=5.0)
    p0 = UniformInterval(0.0, 2.0)
    profile = Constant(rate)
    t_end = params.t_end
    table = compute_phi(t_end, p0, profile, params.sigma_c)
    coarse = grid.run(params, p0, profile)
    fine = grid.run(replace(params, n_cells=2 * params.n_cells), p0, profile)
    gap = grid.l1_distance(coarse.field, evaluate_p(t_end, coarse.field.sigma, table))
    gap_fine = grid.l1_distance(fine.field, evaluate_p(t_end, fine.field.sigma, table))
    ratio = gap / gap_fine
    mc = estimate(PdmpConfig(n_paths, seed, profile, params.sigma_c, t_end, p0), [t_end], jobs=jobs)[-1]
    obs = coarse.series.final
    z_f = abs(mc.f_hat - obs.f) / mc.f_se
    z_tau = abs(mc.tau_hat - obs.tau) / mc.tau_se
    checks = (
        ("l1_gap_grid_vs_characteristics", gap, f"<= {gap_tol:g}", gap <= gap_tol),
        ("l1_gap_refinement_ratio", ratio, f"in [{ratio_band[0]:g}, {ratio_band[1]:g}]",
         ratio_band[0] <= ratio <= ratio_band[1]),
        ("fluidity_mc_vs_grid_in_se", z_f, f"<= {n_se:g}", z_f <= n_se),
        ("stress_mc_vs_grid_in_se", z_tau, f"<= {n_se:g}", z_tau <= n_se),
    )
    return ComparisonReport(gap, gap_fine, ratio, obs.f, obs.tau, mc.f_hat, mc.f_se, mc.tau_hat, mc.tau_se, checks)
