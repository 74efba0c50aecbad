from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from agingfluid.characteristics import (
    compute_A,
    compute_phi,
    density_mass,
    evaluate_p,
    fluidity_of_density,
    renewal_residual,
)
from agingfluid.errors import DegenerateShearError, ResolutionError
from agingfluid.initial import StationaryInitial, TruncatedGaussian, UniformInterval
from agingfluid.model import Affine, Constant, LinearRamp, TimeScaled, occupation_time, steady_observables

UNIFORM = UniformInterval(0.0, 2.0)


def brute_force_A(t, p0, profile, sigma_c):
    """Mass still in flight from the initial datum above threshold: 2-D quadrature oracle.

    Integrates p0(xi) * exp(-time spent above threshold) over starting stresses
    whose position at time t is above threshold.
    """
    g = float(profile.accum(t))
    lo, hi = p0.support

    def integrand(xi):
        sigma = xi + g
        if abs(sigma) <= sigma_c:
            return 0.0
        occ = integrate.quad(
            lambda s: float(abs(xi + float(profile.accum(s))) > sigma_c), 0, t, limit=200,
            points=[u for u in (float(profile.inverse(max(0.0, lvl - xi))) for lvl in (-sigma_c, sigma_c)) if 0 < u < t] or None,
        )[0]
        return float(p0.pdf(xi)) * math.exp(-occ)

    pts = [x for x in (sigma_c - g, -sigma_c - g, *p0.breakpoints) if lo < x < hi]
    return integrate.quad(integrand, lo, hi, points=pts or None, limit=400, epsabs=1e-11)[0]


def test_A_examples():
    assert compute_A(0.0, UNIFORM, Constant(1.0), 2.0) == 0.0
    assert compute_A(1.0, UNIFORM, Constant(1.0), 2.0) == pytest.approx(0.5 * (1 - math.exp(-1)), abs=1e-12)
    assert compute_A(2.0, UNIFORM, Constant(1.0), 2.0) == pytest.approx(0.5 * (1 - math.exp(-2)), abs=1e-12)


@pytest.mark.parametrize(
    "p0,profile,t",
    [
        (TruncatedGaussian(10.0), Constant(1.0), 1.7),
        (TruncatedGaussian(10.0), Affine(0.5, 0.3), 4.0),
        (UNIFORM, TimeScaled(Affine(0.2, 1.0), 0.5), 3.0),
    ],
)
def test_A_matches_brute_force(p0, profile, t):
    got = compute_A(t, p0, profile, 2.0)
    assert got == pytest.approx(brute_force_A(t, p0, profile, 2.0), abs=1e-8)
    assert 0.0 <= got <= 1.0


@pytest.fixture(scope="module")
def uniform_table():
    return compute_phi(8.0, UNIFORM, Constant(1.0), 2.0)


def test_phi_first_windows(uniform_table):
    assert uniform_table(1.0) == pytest.approx(0.5 * (1 - math.exp(-1)), abs=1e-10)
    assert uniform_table(2.0) == pytest.approx(0.5 * (1 - math.exp(-2)), abs=1e-10)


def test_evaluate_p_examples(uniform_table):
    assert np.all(evaluate_p(3.0, np.array([-3.0, -1.0, -1e-3]), uniform_table) == 0.0)
    assert evaluate_p(3.0, 1.0, uniform_table) == pytest.approx(uniform_table(2.0), abs=1e-14)


def test_evaluate_p_positive(uniform_table):
    s = np.linspace(-5, 20, 2001)
    for t in (0.5, 2.5, 6.0, 8.0):
        assert evaluate_p(t, s, uniform_table).min() >= 0.0


@pytest.mark.parametrize("t", [0.5, 2.0, 4.3, 8.0])
def test_fluidity_consistency(uniform_table, t):
    assert fluidity_of_density(t, uniform_table).gap <= 1e-6


@pytest.mark.parametrize("t", [1.0, 4.3, 8.0])
def test_mass(uniform_table, t):
    # the linear interpolant of the rate costs O(dt^2) in mass
    assert density_mass(t, uniform_table) == pytest.approx(1.0, abs=1e-5)


def test_fluidity_equals_direct_part_on_first_window(uniform_table):
    check = fluidity_of_density(1.5, uniform_table)
    assert check.integral == pytest.approx(compute_A(1.5, UNIFORM, Constant(1.0), 2.0), abs=1e-9)


def test_stationary_datum_stays_stationary():
    rate = 0.5
    table = compute_phi(10.0, StationaryInitial(rate, 2.0), Constant(rate), 2.0)
    f_inf = steady_observables(rate, 2.0).f_inf
    assert np.max(np.abs(table.phi - f_inf)) <= 1e-6


def test_renewal_residual_is_first_order():
    prof, p0 = Constant(1.0), TruncatedGaussian(10.0)
    worst = [np.max(np.abs(renewal_residual(compute_phi(6.0, p0, prof, 2.0, dt))[1])) for dt in (0.02, 0.01)]
    assert worst[0] / worst[1] == pytest.approx(2.0, rel=0.25)


def test_long_time_limit():
    table = compute_phi(30.0, TruncatedGaussian(10.0), Constant(1.0), 2.0)
    assert table(30.0) == pytest.approx(1 / 3, abs=1e-4)


def test_occupation_matches_transport_weight(uniform_table):
    # the transported term decays with the time spent above threshold
    t, sigma = 5.0, 6.5
    occ = occupation_time(Constant(1.0), t, sigma, 2.0)
    assert evaluate_p(t, sigma, uniform_table) == pytest.approx(0.5 * math.exp(-occ), rel=1e-12)


def test_errors():
    with pytest.raises(DegenerateShearError):
        compute_phi(1.0, UNIFORM, LinearRamp(1.0), 2.0)
    with pytest.raises(ResolutionError):
        compute_phi(5.0, UNIFORM, Constant(1.0), 2.0, dt=0.5)
    table = compute_phi(1.0, UNIFORM, Constant(1.0), 2.0)
    with pytest.raises(ResolutionError):
        evaluate_p(2.0, 0.5, table)
