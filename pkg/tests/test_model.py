from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from agingfluid.errors import ConfigurationError, DegenerateShearError, OutOfRangeError
from agingfluid.model import (
    Affine,
    Constant,
    LinearRamp,
    ModelParams,
    TimeScaled,
    bisect_inverse,
    closure_kappa,
    gamma_accum,
    gamma_inverse,
    indicator,
    occupation_time,
    stationary_density,
    steady_observables,
)

PROFILES = [
    Constant(0.5),
    Constant(3.0),
    LinearRamp(1.0),
    Affine(0.1, 1.0),
    Affine(2.0, 0.0),
    TimeScaled(LinearRamp(1.0), 0.05),
    TimeScaled(Affine(0.3, 2.0), 0.1),
]


def occupation_oracle(profile, t, sigma, sigma_c):
    """Time above threshold along the characteristic ending at (t, sigma), by adaptive quadrature."""
    g_t = float(profile.accum(t))

    def chi(s):
        return float(abs(sigma - g_t + float(profile.accum(s))) > sigma_c)

    # breakpoints where the path crosses +-sigma_c
    points = []
    for level in (-sigma_c, sigma_c):
        y = g_t - sigma + level
        if 0 < y < g_t:
            points.append(float(bisect_inverse(profile, y)))
    val, _ = integrate.quad(chi, 0.0, t, points=sorted(points) or None, limit=200, epsabs=1e-12)
    return val


class TestParams:
    def test_defaults(self):
        p = ModelParams()
        assert p.sigma_c == 2.0 and p.m_sigma == 10.0 and p.n_cells == 4000
        assert p.dsigma == pytest.approx(5e-3)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(sigma_c=0.0), dict(sigma_c=3.0, m_sigma=2.0), dict(n_cells=4), dict(dt=0.0), dict(t_end=-1.0)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            ModelParams(**kwargs)


class TestIndicator:
    def test_examples(self):
        assert indicator(0.0, 2.0) == 0
        assert indicator(2.0, 2.0) == 0
        assert indicator(-5.0, 2.0) == 1

    @given(st.floats(-50, 50), st.floats(0.01, 10))
    def test_even_and_monotone(self, sigma, sc):
        assert indicator(sigma, sc) == indicator(-sigma, sc)
        assert indicator(sigma, sc) == (1 if abs(sigma) > sc else 0)


class TestStationary:
    def test_examples(self):
        assert stationary_density(-0.5, 1.0, 2.0) == 0.0
        assert stationary_density(1.0, 1.0, 2.0) == pytest.approx(1 / 3, rel=1e-15)
        assert stationary_density(3.0, 1.0, 2.0) == pytest.approx(math.exp(-1) / 3, rel=1e-14)

    @pytest.mark.parametrize("rate", [0.1, 0.5, 1.0, 2.0, 10.0])
    def test_unit_mass(self, rate):
        sc = 2.0
        mass = integrate.quad(lambda s: stationary_density(s, rate, sc), 0, sc)[0]
        mass += integrate.quad(lambda s: stationary_density(s, rate, sc), sc, np.inf)[0]
        assert mass == pytest.approx(1.0, abs=1e-10)

    def test_steady_examples(self):
        s = steady_observables(1.0, 2.0)
        assert s.f_inf == pytest.approx(1 / 3, rel=1e-15)
        assert s.tau_inf == pytest.approx(5 / 3, rel=1e-15)
        assert s.beta_inf == pytest.approx(1.0, rel=1e-15)
        assert s.kappa == pytest.approx(1.8, rel=1e-15)
        assert steady_observables(2.0, 2.0).kappa == pytest.approx(1.6, rel=1e-15)
        assert closure_kappa(1e-9, 2.0) == pytest.approx(2.0, rel=1e-15)

    def test_moments_match_quadrature(self):
        rate, sc = 0.7, 2.0
        s = steady_observables(rate, sc)
        pdf = lambda x: stationary_density(x, rate, sc)
        f = integrate.quad(pdf, sc, np.inf)[0]
        tau = integrate.quad(lambda x: x * pdf(x), 0, sc)[0] + integrate.quad(lambda x: x * pdf(x), sc, np.inf)[0]
        assert s.f_inf == pytest.approx(f, rel=1e-10)
        assert s.tau_inf == pytest.approx(tau, rel=1e-10)

    @given(st.floats(1e-3, 100.0), st.floats(0.1, 10.0))
    def test_closure_identity(self, rate, sc):
        s = steady_observables(rate, sc)
        assert s.kappa * s.f_inf * s.tau_inf == pytest.approx(rate, rel=1e-12)


class TestAccumAndInverse:
    def test_examples(self):
        assert gamma_accum(Constant(0.5), 4.0) == pytest.approx(2.0)
        for prof in PROFILES:
            assert gamma_accum(prof, 0.0) == 0.0
        eps = 0.03
        assert gamma_accum(TimeScaled(LinearRamp(1.0), eps), 2.0) == pytest.approx(eps * 2.0, rel=1e-15)
        assert gamma_inverse(Constant(0.5), 2.0) == pytest.approx(4.0)
        assert Affine(0.1, 1.0).inverse(1.0) == pytest.approx(-0.1 + math.sqrt(2.01), rel=1e-14)

    @pytest.mark.parametrize("prof", PROFILES)
    @given(t=st.floats(0.0, 50.0))
    def test_round_trip(self, prof, t):
        assert float(prof.inverse(prof.accum(t))) == pytest.approx(t, abs=1e-10, rel=1e-12)

    @pytest.mark.parametrize("prof", PROFILES)
    def test_accum_is_integral_of_rate(self, prof):
        for t in (0.3, 2.0, 7.5):
            assert float(prof.accum(t)) == pytest.approx(integrate.quad(prof.rate, 0, t)[0], rel=1e-12)

    @pytest.mark.parametrize("prof", PROFILES)
    def test_closed_form_matches_bisection(self, prof):
        y = np.array([1e-3, 0.5, 3.0])
        np.testing.assert_allclose(prof.inverse(y), bisect_inverse(prof, y), rtol=1e-11)

    def test_errors(self):
        with pytest.raises(DegenerateShearError):
            gamma_inverse(LinearRamp(1.0), 1.0)
        with pytest.raises(OutOfRangeError):
            gamma_inverse(Constant(1.0), -1.0)
        with pytest.raises(OutOfRangeError):
            gamma_inverse(Constant(1.0), 5.0, t_end=2.0)
        with pytest.raises(ConfigurationError):
            gamma_accum(Constant(1.0), -1.0)
        with pytest.raises(ConfigurationError):
            Constant(0.0)


class TestOccupation:
    def test_examples(self):
        prof = Constant(1.0)
        assert occupation_time(prof, 5.0, -3.0, 2.0) == pytest.approx(5.0)
        assert occupation_time(prof, 5.0, 0.0, 2.0) == pytest.approx(3.0)
        assert occupation_time(prof, 5.0, 6.0, 2.0) == pytest.approx(4.0)

    @pytest.mark.parametrize("prof", PROFILES)
    @given(t=st.floats(0.0, 12.0), sigma=st.floats(-8.0, 8.0))
    def test_matches_quadrature(self, prof, t, sigma):
        got = float(occupation_time(prof, t, sigma, 2.0))
        assert got == pytest.approx(occupation_oracle(prof, t, sigma, 2.0), abs=1e-8)
        assert -1e-12 <= got <= t + 1e-12
