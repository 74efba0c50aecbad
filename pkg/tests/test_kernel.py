from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import optimize, special

from agingfluid.errors import ConfigurationError, ResolutionError
from agingfluid.kernel import alternate_rate, characteristic, kernel_k, scan_function, sharp_rate_b, solve_dde


def lambert_rate(omega: float) -> float:
    """Minus the real part of the rightmost nonzero root of lambda + 1 = exp(-omega lambda).

    Roots are lambda = W_k(omega e^omega)/omega - 1; branch 0 gives lambda = 0.
    """
    best = -np.inf
    for k in range(-3, 4):
        lam = special.lambertw(omega * math.exp(omega), k) / omega - 1.0
        if abs(lam) > 1e-9:
            best = max(best, lam.real)
    return -best


def bisection_rate(omega: float) -> float:
    """Bisection on the complex-root system, seeded from the Lambert-W estimate."""
    guess = lambert_rate(omega)

    def real_part_residual(x):
        return scan_function(x, omega)

    lo, hi = -guess * (1 + 1e-3), -guess * (1 - 1e-3)
    return -optimize.bisect(real_part_residual, lo, hi, xtol=1e-15, rtol=1e-15)


OMEGAS = [0.1, 0.5, 1.0, 2.5, 10 / 3, 5.0, 10.0, 20.0, 100.0]


@pytest.mark.parametrize("omega", OMEGAS)
def test_sharp_rate_matches_lambert(omega):
    r = sharp_rate_b(omega)
    assert r.b == pytest.approx(lambert_rate(omega), rel=1e-9)
    assert r.residual <= 1e-10
    assert abs(characteristic(complex(r.root, r.imag), omega)) <= 1e-9


@pytest.mark.parametrize("omega", [2.5, 20.0])
def test_sharp_rate_matches_bisection_oracle(omega):
    assert sharp_rate_b(omega).b == pytest.approx(bisection_rate(omega), rel=1e-10)


def test_sharp_rate_ordering_and_eta():
    rates = [sharp_rate_b(w).b for w in OMEGAS]
    assert all(a > b > 0 for a, b in zip(rates, rates[1:]))
    r = sharp_rate_b(2.5, eta=0.01)
    assert r.b == pytest.approx(sharp_rate_b(2.5).b - 0.01, rel=1e-12)


def test_alternate_rate():
    assert alternate_rate(1.0).b_tilde == pytest.approx(-math.log(1 - math.exp(-2)) / 2, rel=1e-14)
    assert alternate_rate(0.5).b_tilde == pytest.approx(-math.log(1 - math.exp(-1)), rel=1e-14)
    assert alternate_rate(1.0).c0 == 3.0
    assert 0 < alternate_rate(50.0).b_tilde < 1e-40
    with pytest.raises(ConfigurationError):
        alternate_rate(0.0)


def test_kernel_examples():
    k = kernel_k(1.0, 40.0)
    assert k(0.5) == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert k(1.5) == pytest.approx(math.exp(-1.5) + math.exp(-0.5) * 0.5, abs=1e-6)
    assert abs(k(40.0) - 0.5) <= 1e-6
    first = k.t <= 1.0
    np.testing.assert_allclose(k.k[first], np.exp(-k.t[first]), atol=1e-12)


def test_kernel_second_window_converges():
    exact = math.exp(-1.5) + math.exp(-0.5) * 0.5
    errs = [abs(kernel_k(1.0, 2.0, dt=h)(1.5) - exact) for h in (1 / 64, 1 / 128, 1 / 256)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)


@pytest.mark.parametrize("omega", [1.0, 2.5, 5.0])
def test_kernel_limit_bound_and_sign_changes(omega):
    k = kernel_k(omega, 40.0)
    bound = (2 + omega) * math.exp(-alternate_rate(omega).b_tilde * 40.0)
    assert abs(k(40.0) - 1 / (1 + omega)) <= bound
    k1 = k.k1
    for m in range(1, 4):
        window = (k.t > m * omega) & (k.t < (m + 1) * omega)
        assert np.any(np.diff(np.sign(k1[window])) != 0)


def test_kernel_resolution_error():
    with pytest.raises(ResolutionError):
        kernel_k(1.0, 5.0, dt=0.1)


def test_dde_constant_preserved():
    sol = solve_dde(2.0, lambda t: np.full_like(t, 3.5), None, 20.0)
    assert np.max(np.abs(sol.u - 3.5)) <= 1e-14
    assert sol.max_discrepancy <= 1e-6


def test_dde_exponential_history_gives_kernel():
    omega = 1.0
    sol = solve_dde(omega, lambda t: np.exp(-t), None, 10.0, dt=omega / 1024)
    k = kernel_k(omega, 10.0, dt=omega / 1024)
    np.testing.assert_allclose(sol.u, k(sol.t), atol=1e-12)


def test_dde_linearity(rng):
    omega, t_end = 1.5, 12.0
    a1, a2, c1, c2 = rng.normal(size=4)
    nu1 = lambda t: np.cos(a1 * t)
    nu2 = lambda t: np.exp(-a2**2 * t)
    mu1 = lambda t: np.sin(c1 * t)
    mu2 = lambda t: c2 * np.ones_like(t)
    s1 = solve_dde(omega, nu1, mu1, t_end)
    s2 = solve_dde(omega, nu2, mu2, t_end)
    s12 = solve_dde(omega, lambda t: nu1(t) + nu2(t), lambda t: mu1(t) + mu2(t), t_end)
    np.testing.assert_allclose(s12.u, s1.u + s2.u, atol=1e-10)
    np.testing.assert_allclose(s12.u_convolution, s1.u_convolution + s2.u_convolution, atol=1e-10)
