"""Bessel-K implementation against its integral representation and bounds."""

import math

import numpy as np
import pytest
from scipy import integrate

from dppstat._special import bessel_k, log_bessel_k, matern_correlation


def bessel_k_quadrature(nu: float, x: float) -> float:
    """Independent oracle: sqrt(pi)/Gamma(nu+1/2) (x/2)^nu int_1^inf e^{-xt}(t^2-1)^{nu-1/2} dt."""

    def integrand(u):  # t = 1 + u
        return math.exp(-x * (1.0 + u)) * (u * (u + 2.0)) ** (nu - 0.5)

    head, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=400)
    tail, _ = integrate.quad(integrand, 1.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=400)
    return math.sqrt(math.pi) / math.gamma(nu + 0.5) * (x / 2.0) ** nu * (head + tail)


def test_half_order_closed_form_exact():
    xs = 10.0 ** np.linspace(-6, 2, 200)
    closed = np.sqrt(np.pi / (2.0 * xs)) * np.exp(-xs)
    rel = np.abs(bessel_k(0.5, xs) - closed) / closed
    assert rel.max() < 1e-12


def test_against_quadrature_oracle():
    cases = [(1.0, 1.0), (0.3, 0.5), (2.5, 3.0), (5.0, 0.2), (0.75, 10.0)]
    for nu, x in cases:
        oracle = bessel_k_quadrature(nu, x)
        assert bessel_k(nu, x) == pytest.approx(oracle, rel=1e-9)


def test_known_value_k1_at_1():
    # frozen from the quadrature oracle
    assert bessel_k(1.0, 1.0) == pytest.approx(0.6019072301972346, rel=1e-12)


def test_small_x_power_law():
    # x^nu K_nu(x) -> 2^(nu-1) Gamma(nu); nu = 2 gives 2
    x = 1e-8
    assert x**2 * bessel_k(2.0, x) == pytest.approx(2.0, rel=1e-6)
    # the limit is approached at rate O(x^min(2nu, 2)); keep x^2nu small
    x = 1e-12
    for nu in (0.3, 1.7, 4.0):
        lim = 2.0 ** (nu - 1.0) * math.gamma(nu)
        assert x**nu * bessel_k(nu, x) == pytest.approx(lim, rel=1e-5)


def test_lemma_bounds_random_sweep():
    gen = np.random.default_rng(7)
    n = 10_000
    nu = 10.0 ** gen.uniform(-2, math.log10(20.0), n)
    x = 10.0 ** gen.uniform(-3, math.log10(30.0), n)
    k = bessel_k(nu, x)

    hi = nu >= 0.5
    gam = np.array([math.gamma(1.0 + 2.0 * v) ** (-1.0 / (2.0 * v)) for v in nu[hi]])
    bound_hi = (
        2.0 ** (nu[hi] - 1.0)
        * np.array([math.gamma(v) for v in nu[hi]])
        * x[hi] ** (-nu[hi])
        * (1.0 - (1.0 - np.exp(-gam * x[hi])) ** (2.0 * nu[hi]))
    )
    assert np.all(k[hi] <= bound_hi * (1.0 + 1e-10))

    lo = ~hi
    bound_lo = np.sqrt(np.pi / (2.0 * x[lo])) * np.exp(-x[lo])
    assert np.all(k[lo] <= bound_lo * (1.0 + 1e-10))


def test_scipy_cross_check():
    from scipy.special import kv

    gen = np.random.default_rng(3)
    nu = 10.0 ** gen.uniform(-3, 2.3, 5000)
    x = 10.0 ** gen.uniform(-5, 2.2, 5000)
    ref = kv(nu, x)
    ok = np.isfinite(ref) & (ref > 0)
    rel = np.abs(bessel_k(nu[ok], x[ok]) - ref[ok]) / ref[ok]
    assert rel.max() < 5e-12


def test_log_version_consistent_and_overflow_safe():
    assert log_bessel_k(1.5, 2.0) == pytest.approx(math.log(bessel_k(1.5, 2.0)), rel=1e-13)
    # order 200 at small argument overflows the plain value but not the log
    val = log_bessel_k(200.0, 0.01)
    assert np.isfinite(val) and val > 700


def test_domain_error():
    with pytest.raises(ValueError):
        bessel_k(1.0, 0.0)
    with pytest.raises(ValueError):
        bessel_k(1.0, -2.0)


def test_matern_correlation_exponential_case():
    t = np.linspace(0.01, 12.0, 200)
    assert np.abs(matern_correlation(0.5, t) - np.exp(-t)).max() < 1e-13
    assert matern_correlation(3.0, 0.0) == 1.0
    # large order stays finite and in (0, 1]
    vals = matern_correlation(200.0, np.linspace(0.0, 2.0, 50))
    assert np.all((vals > 0) & (vals <= 1.0 + 1e-12))
