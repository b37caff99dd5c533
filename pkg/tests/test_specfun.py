import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from wavepacket_lab.specfun import (
    BesselOrder,
    QuadratureNotConverged,
    QuadratureRule,
    bessel_j,
    bessel_j_asymptotic,
    bessel_j_halfint_integral,
    bessel_j_interval_integral,
    bessel_j_orders,
    bessel_j_series,
    check_bessel_recursion,
    composite_gauss_legendre,
    gauss_legendre,
    gegenbauer,
    oscillatory_integrate,
)


def mp_series(s, y, dps=50):
    """Power series summed in extended precision; no cancellation issues."""
    with mp.workdps(dps):
        return float(mp.besselj(mp.mpf(s), mp.mpf(y)))


class TestBesselOrder:
    def test_from_float(self):
        assert BesselOrder.of(2.5).twice_order == 5
        assert BesselOrder.for_mode(3, 4).s == 4.5
        assert BesselOrder.for_mode(2, 0).is_integer

    @pytest.mark.parametrize("bad", [0.3, 1.25])
    def test_rejects_non_half_integer(self, bad):
        with pytest.raises(ValueError):
            BesselOrder.of(bad)

    def test_rejects_low_order(self):
        with pytest.raises(ValueError):
            BesselOrder(-2)


class TestClosedForms:
    y = np.linspace(0.05, 30.0, 97)

    def test_half(self):
        ref = np.sqrt(2 / (np.pi * self.y)) * np.sin(self.y)
        assert_allclose(bessel_j(0.5, self.y), ref, atol=1e-14)

    def test_three_halves(self):
        y = self.y
        ref = np.sqrt(2 / (np.pi * y)) * (np.sin(y) / y - np.cos(y))
        assert_allclose(bessel_j(1.5, y), ref, atol=1e-14)

    def test_minus_half(self):
        ref = np.sqrt(2 / (np.pi * self.y)) * np.cos(self.y)
        assert_allclose(bessel_j(-0.5, self.y), ref, atol=1e-14)

    def test_values_at_zero(self):
        assert bessel_j(0, 0.0) == 1.0
        assert bessel_j(2.5, 0.0) == 0.0

    def test_spot_value(self):
        # J_{5/2}(1) = sqrt(2/pi) * ((3 - 1) sin 1 - 3 cos 1)
        ref = math.sqrt(2 / math.pi) * (2 * math.sin(1.0) - 3 * math.cos(1.0))
        assert_allclose(bessel_j(2.5, 1.0), ref, rtol=1e-13)


@pytest.mark.parametrize("twice", [0, 1, 2, 3, 5, 8, 13, 21])
def test_bessel_against_series_oracle(twice):
    s = twice / 2
    ys = np.linspace(0.0, 20.0, 81)
    ref = np.array([mp_series(s, y) for y in ys])
    assert_allclose(bessel_j(s, ys), ref, atol=1e-12)


@pytest.mark.parametrize("start", [0.0, 0.5, -0.5, 3.5])
def test_ladder_matches_oracle(start):
    rng = np.random.default_rng(7)
    ys = np.concatenate([rng.uniform(0, 3, 20), rng.uniform(3, 300, 40), [1e-4, 1500.25]])
    count = 120
    got = bessel_j_orders(start, count, ys)
    for k in range(0, count, 11):
        ref = np.array([mp_series(start + k, y) for y in ys])
        assert_allclose(got[k], ref, rtol=1e-11, atol=1e-13)


def test_ladder_agrees_with_single_order():
    ys = np.linspace(0.0, 60.0, 301)
    ladder = bessel_j_orders(1.5, 30, ys)
    for k in (0, 9, 29):
        assert_allclose(ladder[k], bessel_j(1.5 + k, ys), atol=1e-13)


def test_series_is_good_for_small_arguments():
    assert_allclose(bessel_j_series(10.5, 3.0), mp_series(10.5, 3.0), rtol=1e-13)


@pytest.mark.parametrize("s", [0.0, 0.5, 1.5, 3.0])
def test_interval_integral(s):
    for y in (0.3, 4.0, 17.5):
        assert_allclose(bessel_j_interval_integral(s, y), mp_series(s, y), atol=1e-12)


@pytest.mark.parametrize("s", [0, 1, 2, 5])
def test_doubled_interval_integer_orders(s):
    for y in (1.0, 7.3, 19.9):
        val = bessel_j_halfint_integral(s, y)
        assert abs(val.imag) < 1e-12
        assert_allclose(val.real, mp_series(s, y), atol=1e-12)


@pytest.mark.parametrize("s", [0.5, 1.5, 2.5])
def test_doubled_interval_vanishes_for_half_odd_orders(s):
    # the two halves of the doubled interval cancel exactly at half-odd order
    assert abs(bessel_j_halfint_integral(s, 3.7)) < 1e-12


@pytest.mark.parametrize("s", [0.0, 0.5, 2.0])
def test_asymptotic_large_argument(s):
    assert_allclose(bessel_j_asymptotic(s, 150.0), mp_series(s, 150.0), atol=1e-13)


@pytest.mark.parametrize("s", [0.0, 0.5, 2.5, 7.0])
def test_recursion_identity(s):
    assert check_bessel_recursion(s, [0.4, 2.0, 9.0, 18.0]) < 1e-8


@pytest.mark.parametrize("bad", [-1.0, np.nan, np.inf])
def test_rejects_bad_argument(bad):
    with pytest.raises(ValueError):
        bessel_j(0.5, bad)


@settings(max_examples=40, deadline=None)
@given(twice=st.integers(0, 21), y=st.floats(0.01, 20.0))
def test_three_term_recurrence(twice, y):
    s = twice / 2
    lhs = bessel_j(s, y) + bessel_j(s + 2, y)
    rhs = 2 * (s + 1) / y * bessel_j(s + 1, y)
    assert abs(lhs - rhs) < 1e-11 * max(1.0, abs(rhs))


class TestGegenbauer:
    x = np.linspace(-1, 1, 31)

    @pytest.mark.parametrize("l", [0, 1, 4, 11])
    @pytest.mark.parametrize("lam", [0.5, 1.0, 1.5])
    def test_against_scipy(self, l, lam):
        from scipy.special import eval_gegenbauer

        assert_allclose(gegenbauer(l, lam, self.x), eval_gegenbauer(l, lam, self.x), rtol=1e-12, atol=1e-12)

    def test_value_at_one(self):
        # C_l^lam(1) = (2 lam)_l / l!
        for l in range(8):
            ref = math.gamma(2 * 1.5 + l) / (math.gamma(3.0) * math.factorial(l))
            assert_allclose(gegenbauer(l, 1.5, 1.0), ref, rtol=1e-13)

    def test_domain(self):
        with pytest.raises(ValueError):
            gegenbauer(2, 1.0, 1.5)


class TestQuadrature:
    def test_gauss_legendre_polynomial_exactness(self):
        rule = gauss_legendre(8, 0.0, 2.0)
        assert_allclose(rule.integrate(lambda x: x**15), 2.0**16 / 16, rtol=1e-13)

    def test_composite(self):
        rule = composite_gauss_legendre(0.0, math.pi, 4)
        assert len(rule) == 128
        assert_allclose(rule.integrate(np.sin), 2.0, rtol=1e-14)

    def test_rule_validation(self):
        with pytest.raises(ValueError):
            QuadratureRule(np.array([0.0, 0.5]), np.array([1.0, 1.0]), (0.0, 1.0))

    def test_oscillatory_known_integral(self):
        # int_0^1 e^{2 pi i f x} dx in closed form
        f = 37.25
        ref = (np.exp(2j * np.pi * f) - 1) / (2j * np.pi * f)
        got = oscillatory_integrate(np.ones_like, f, gauss_legendre(32, 0.0, 1.0))
        assert_allclose(got, ref, rtol=1e-12)

    def test_oscillatory_gaussian(self):
        # Fourier transform of a Gaussian over a wide interval
        f = 3.0
        got = oscillatory_integrate(lambda x: np.exp(-np.pi * x * x), f, gauss_legendre(32, -8.0, 8.0))
        assert_allclose(got, np.exp(-np.pi * f * f), atol=1e-13)

    def test_non_convergence_raises(self):
        rng = np.random.default_rng(0)
        with pytest.raises(QuadratureNotConverged):
            oscillatory_integrate(lambda x: rng.normal(size=x.shape), 1.0, gauss_legendre(32, 0, 1), max_depth=2)
