"""Acceptance suite: one PASS/FAIL line per criterion, printed even under output capture.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import math
import tempfile
import time
from dataclasses import dataclass

import numpy as np
import pytest
from scipy import integrate

from agingfluid import grid
from agingfluid.experiments import default_config, run_experiment, three_way_comparison
from agingfluid.fitting import fit_envelope_rate
from agingfluid.initial import StationaryInitial
from agingfluid.kernel import alternate_rate, kernel_k, sharp_rate_b, solve_dde
from agingfluid.model import Constant, ModelParams, stationary_density, steady_observables

SLOPE_BAND = (0.7, 1.3)
RATIO_BAND = (1.6, 2.6)
OUT_DIR = tempfile.mkdtemp(prefix="agingfluid-acceptance-")


@dataclass
class InvariantLog:
    """Worst mass error and smallest density value over every recorded grid sample."""

    samples: int = 0
    worst_mass_error: float = 0.0
    min_value: float = math.inf

    def observe(self, obs: grid.Observables) -> None:
        self.samples += 1
        self.worst_mass_error = max(self.worst_mass_error, abs(obs.mass - 1.0))
        self.min_value = min(self.min_value, obs.min_value)


LOG = InvariantLog()


@pytest.fixture(autouse=True, scope="module")
def _watch_grid_invariants():
    """Record every sample the grid solver checks during this module."""
    original = grid._check

    def watched(obs):
        LOG.observe(obs)
        original(obs)

    grid._check = watched
    yield
    grid._check = original


def report(capsys, number: int, passed: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[criterion {number}] {'PASS' if passed else 'FAIL'}: {detail}")


def timed(func):
    @functools.cache
    def wrapper():
        start = time.perf_counter()
        out = func()
        return out, time.perf_counter() - start

    return wrapper


# ---------------------------------------------------------------------------
# computations, cached so the invariant check can reuse them
# ---------------------------------------------------------------------------


@timed
def steady_identity():
    sc = 2.0
    rows = []
    for rate in (0.1, 0.5, 1.0, 2.0, 10.0):
        s = steady_observables(rate, sc)
        rel = abs(s.kappa * s.f_inf * s.tau_inf - rate) / rate
        pdf = lambda x, r=rate: stationary_density(x, r, sc)
        mass = integrate.quad(pdf, 0.0, sc, epsabs=1e-14)[0] + integrate.quad(pdf, sc, np.inf, epsabs=1e-14)[0]
        rows.append((rate, rel, abs(mass - 1.0)))
    return rows


@timed
def grid_drift():
    rate = 0.5
    drifts = []
    for n in (4000, 8000):
        params = ModelParams(sigma_c=2.0, m_sigma=10.0, n_cells=n, t_end=10.0)
        res = grid.run(params, StationaryInitial(rate, 2.0), Constant(rate))
        drifts.append(grid.l1_distance(res.field, lambda s: stationary_density(s, rate, 2.0)))
    return drifts


@timed
def comparison():
    return three_way_comparison()


@timed
def kernel_rates():
    rows = []
    for omega in (1.0, 2.5, 5.0):
        k = kernel_k(omega, 40.0)
        first = k.t < omega
        first_err = float(np.max(np.abs(k.k[first] - np.exp(-k.t[first]))))
        limit_gap = abs(k(40.0) - 1.0 / (1.0 + omega))
        bound = (2.0 + omega) * math.exp(-alternate_rate(omega).b_tilde * 40.0)
        rate = sharp_rate_b(omega)
        fit = fit_envelope_rate(k.t, k.k1, min(5.0 * omega, 20.0), floor=100 * np.finfo(float).eps)
        rows.append((omega, first_err, limit_gap, bound, fit.value, rate.b, rate.residual))
    return rows


@timed
def experiment_i():
    return run_experiment(default_config("i", out_dir=f"{OUT_DIR}/i"))


@timed
def experiment_ii():
    return run_experiment(default_config("ii", out_dir=f"{OUT_DIR}/ii"))


@timed
def experiment_iii():
    return run_experiment(default_config("iii", out_dir=f"{OUT_DIR}/iii"))


@timed
def dde_consistency():
    rng = np.random.default_rng(2024)
    gaps = []
    for omega in (0.5, 1.0, 2.5, 5.0):
        a, b, c, d = rng.normal(size=4)
        nu = lambda t, a=a, b=b: a + b * np.sin(3.0 * t)
        mu = lambda t, c=c, d=d: c * np.cos(t) + d * np.exp(-0.1 * t)
        sol = solve_dde(omega, nu, mu, min(10.0 * omega, 30.0), tol=None)
        gaps.append(sol.max_discrepancy)
    const = 1.7
    sol = solve_dde(2.0, lambda t: np.full_like(t, const), None, 30.0, tol=None)
    const_err = float(np.max(np.abs(sol.u - const)))
    return gaps, const_err, sol.max_discrepancy


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_1_steady_identity(capsys):
    rows, secs = steady_identity()
    worst_rel = max(r[1] for r in rows)
    worst_mass = max(r[2] for r in rows)
    ok = worst_rel <= 1e-12 and worst_mass <= 1e-10 and secs < 1.0
    report(capsys, 1, ok, f"max rel |kappa f tau - rate| = {worst_rel:.2e}, max |mass - 1| = {worst_mass:.2e}, {secs:.2f} s")
    assert ok


def test_criterion_2_grid_drift(capsys):
    (coarse, fine), secs = grid_drift()
    ratio = coarse / fine
    ok = coarse <= 5e-3 and RATIO_BAND[0] <= ratio <= RATIO_BAND[1] and secs < 30.0
    report(capsys, 2, ok, f"L1 drift {coarse:.3e} (fine {fine:.3e}), ratio {ratio:.3f}, {secs:.1f} s")
    assert ok


def test_criterion_4_three_way(capsys):
    rep, secs = comparison()
    ok = rep.passed and secs < 120.0
    detail = ", ".join(f"{name} {value:.4g}" for name, value, _, _ in rep.checks)
    report(capsys, 4, ok, f"{detail}, {secs:.1f} s")
    assert ok


def test_criterion_5_kernel(capsys):
    rows, secs = kernel_rates()
    ok = secs < 5.0
    parts = []
    for omega, first_err, gap, bound, fitted, b, resid in rows:
        ok &= first_err <= 1e-12 and gap <= bound and fitted >= 0.9 * b and resid <= 1e-10
        parts.append(f"omega={omega:g}: fit/b {fitted / b:.4f}, |k(40)-lim| {gap:.1e} <= {bound:.2g}, res {resid:.1e}")
    report(capsys, 5, ok, "; ".join(parts) + f"; {secs:.2f} s")
    assert ok


def test_criterion_6_experiment_i(capsys):
    summary, secs = experiment_i()
    rows = sorted(summary.rows, key=lambda r: r["gamma_inf"])
    ratios = [r["fitted_rate"] / r["sharp_b"] for r in rows]
    fitted = [r["fitted_rate"] for r in rows]
    ok = (
        not summary.failures
        and len(rows) == 4
        and all(abs(q - 1.0) <= 0.25 for q in ratios)
        and all(b >= a for a, b in zip(fitted, fitted[1:]))
        and secs < 300.0
    )
    detail = ", ".join(f"{r['gamma_inf']:g}: {q:.3f}" for r, q in zip(rows, ratios))
    report(capsys, 6, ok, f"fitted/sharp {detail}, {secs:.1f} s")
    assert ok


def test_criterion_7_experiment_ii(capsys):
    summary, secs = experiment_ii()
    names = ("f_gap", "tau_gap", "mac1_tau_gap", "mac2_tau_gap")
    slopes = {q: summary.fits[q].value for q in names if q in summary.fits}
    ok = (
        not summary.failures
        and len(slopes) == len(names)
        and all(SLOPE_BAND[0] <= s <= SLOPE_BAND[1] for s in slopes.values())
        and secs < 600.0
    )
    detail = ", ".join(f"{q} {s:.3f}" for q, s in slopes.items())
    report(capsys, 7, ok, f"slopes {detail}, {secs:.1f} s")
    assert ok


def test_criterion_8_experiment_iii(capsys):
    summary, secs = experiment_iii()
    rel_gap = max(r["mac2_macc_rel_gap"] for r in summary.rows) if summary.rows else math.inf
    names = ("mac2_tau_gap", "macc_tau_gap")
    slopes = {q: summary.fits[q].value for q in names if q in summary.fits}
    ok = (
        not summary.failures
        and rel_gap <= 1e-3
        and len(slopes) == len(names)
        and all(SLOPE_BAND[0] <= s <= SLOPE_BAND[1] for s in slopes.values())
        and secs < 600.0
    )
    detail = ", ".join(f"{q} slope {s:.3f}" for q, s in slopes.items())
    report(capsys, 8, ok, f"max mac2/macc rel gap {rel_gap:.2e}, {detail}, {secs:.1f} s")
    assert ok


def test_criterion_9_dde(capsys):
    (gaps, const_err, const_gap), secs = dde_consistency()
    ok = max(gaps) <= 1e-6 and const_err <= 4 * np.finfo(float).eps * 1.7 and const_gap <= 1e-6 and secs < 5.0
    report(capsys, 9, ok, f"max discrepancy {max(gaps):.2e}, constant error {const_err:.1e}, {secs:.2f} s")
    assert ok


def test_criterion_3_conservation(capsys):
    # runs after the grid-based criteria above; any run they skipped is performed here
    for compute in (grid_drift, comparison, experiment_i, experiment_ii, experiment_iii):
        compute()
    ok = LOG.samples > 0 and LOG.worst_mass_error <= 1e-10 and LOG.min_value >= 0.0
    report(
        capsys, 3, ok,
        f"{LOG.samples} grid samples, max |mass - 1| = {LOG.worst_mass_error:.2e}, min p = {LOG.min_value:.2e}",
    )
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
