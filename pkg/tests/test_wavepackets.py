import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.special import jv

from wavepacket_lab.harmonics import HarmonicIndex
from wavepacket_lab.propagator import (
    FieldSampler,
    ModeSet,
    RadialProfile,
    hankel_mode,
    make_random_localized,
    window,
)
from wavepacket_lab.wavepackets import (
    ConstantsTable,
    PacketCoefficients,
    Regime,
    ScanGrid,
    asymptotic_bound,
    fit_constants,
    from_packets,
    outer_branch,
    packet_decomposition,
    packet_energy_bounds,
    psi,
    psi_table,
    reconstruct_mode,
    reconstruct_modes,
    to_packets,
)

SMALL = ScanGrid(ls=(0, 1, 4), m_max=8.0, r_max=16.0, dm=0.25, dr=0.0625)


class TestFourierSeries:
    def test_round_trip(self):
        p = RadialProfile(((1.0, 0.0, 3.0),))
        c = to_packets(p)
        rho = np.linspace(0.5, 2.0, 301)
        assert np.max(np.abs(from_packets(c, rho) - p(rho))) <= 1e-8

    def test_zero_profile(self):
        assert not np.any(to_packets(RadialProfile(((0.0, 0.0, 0.0),))))

    def test_parseval(self):
        p = RadialProfile(((1.0, 1.0, -2.0), (0.5j, 0.0, 5.0)))
        c = to_packets(p)
        ref = quad(lambda x: abs(p(np.array([x]))[0]) ** 2, 0.5, 2.0, limit=200, epsabs=1e-14)[0]
        assert_allclose(4 * np.sum(np.abs(c) ** 2), ref, rtol=1e-10)

    def test_support_violation(self):
        with pytest.raises(ValueError):
            to_packets(lambda rho: window(rho).astype(complex))

    def test_single_harmonic_coefficient(self):
        # direct series-evaluation oracle for one coefficient
        p = RadialProfile(((1.0, 0.0, 3.0),))
        c = to_packets(p)
        k = 7
        re = quad(lambda x: (p(np.array([x]))[0] * np.exp(-0.5j * np.pi * k * x)).real, 0.5, 2.0, limit=200)[0]
        im = quad(lambda x: (p(np.array([x]))[0] * np.exp(-0.5j * np.pi * k * x)).imag, 0.5, 2.0, limit=200)[0]
        assert_allclose(c[512 + k], (re + 1j * im) / 4, atol=1e-12)

    def test_energy_equivalence(self):
        f = make_random_localized(3, 4, seed=3)
        pc = packet_decomposition(f)
        lo, hi = packet_energy_bounds(3)
        assert lo * f.energy() <= pc.energy() <= hi * f.energy()
        assert pc.tail_fraction(pc.K_max - 1) <= 1e-8


class TestPsi:
    def test_vanishes_at_origin(self):
        assert psi(1, 3.0, 0.0, 3) == 0

    def test_against_scipy_bessel(self):
        # independent Bessel implementation and adaptive quadrature
        l, m, r = 3, 2.5, 4.0

        def f(rho, part):
            v = jv(l + 0.5, 2 * np.pi * r * rho) * np.exp(-2j * np.pi * m * rho) * window(rho) * rho**1.5
            return v.real if part == 0 else v.imag

        ref = sum(
            (1j**p) * quad(f, 0.25, 4.0, args=(p,), limit=400, epsabs=1e-13)[0] for p in (0, 1)
        )
        assert_allclose(psi(l, m, r, 3), ref, atol=1e-10)

    def test_decay_along_light_cone_origin(self):
        peak = max(abs(psi(0, 0.0, r, 3)) for r in np.linspace(0, 3, 31))
        assert abs(psi(0, 0.0, 20.0, 3)) <= 1e-3 * peak

    def test_table_matches_pointwise(self):
        ms = np.array([-3.0, 0.0, 5.25])
        rs = np.array([0.0, 0.5, 7.0, 12.0])
        tab = psi_table(3, [0, 2, 9], ms, rs)
        for a, l in enumerate([0, 2, 9]):
            for b, m in enumerate(ms):
                for c, r in enumerate(rs):
                    assert_allclose(tab[a, b, c], psi(l, m, r, 3), atol=1e-11)

    @settings(max_examples=20, deadline=None)
    @given(m=st.floats(0, 30), r=st.floats(0, 30), l=st.integers(0, 20))
    def test_conjugation(self, m, r, l):
        tab = psi_table(3, [l], [m, -m], [r])
        assert_allclose(tab[0, 1, 0], np.conj(tab[0, 0, 0]), atol=1e-10)

    def test_example_bound(self):
        C = fit_constants(3, 2, 2, SMALL.extended(48.0))
        bound, reg = asymptotic_bound(8, 40.0, 10.0, 3, 2, 2)
        assert reg is Regime.MIDDLE
        assert abs(psi(8, 40.0, 10.0, 3)) <= max(C.C[Regime.MIDDLE], 1.0) * bound


class TestReconstruction:
    @pytest.mark.parametrize("l", [0, 4, 16])
    def test_matches_hankel_mode(self, l):
        idx = HarmonicIndex.zonal(3, l)
        p = RadialProfile(((1.0, 0.0, 1.0), (0.4j, 1.0, -2.0)))
        pc = packet_decomposition(ModeSet(3, {idx: p}))
        rng = np.random.default_rng(l)
        for t, r in zip(rng.uniform(0, 20, 5), rng.uniform(0, 30, 5)):
            ref = hankel_mode(idx, p, t, r)
            got = reconstruct_mode(pc, idx, t, r)
            assert abs(got - ref) <= 1e-6 * max(abs(ref), 1e-3)

    def test_tensor_grid(self):
        f = make_random_localized(3, 4, seed=1)
        pc = packet_decomposition(f)
        ts, rs = [0.0, 6.0], [0.0, 2.0, 7.5]
        assert_allclose(reconstruct_modes(pc, ts, rs), FieldSampler(f).mode_coefficients(ts, rs), atol=1e-10)

    def test_zero_coefficients(self):
        idx = HarmonicIndex(3, 2, 1)
        pc = PacketCoefficients(3, (idx,), np.zeros((1, 1025), dtype=complex))
        assert reconstruct_mode(pc, idx, 3.0, 2.0) == 0


class TestBounds:
    def test_regimes(self):
        assert asymptotic_bound(3, 7.0, 0.5, 3, 2, 2)[1] is Regime.INNER
        assert asymptotic_bound(3, 40.0, 10.0, 3, 2, 2)[1] is Regime.MIDDLE
        assert asymptotic_bound(5, 40.0, 100.0, 3, 2, 2)[1] is Regime.OUTER

    def test_inner_formula(self):
        b, _ = asymptotic_bound(4, 3.0, 0.5, 3, 2, 1)
        assert_allclose(b, 0.5**0.5 * 4.0**-2 * 5.0**-1)

    def test_outer_branch(self):
        assert outer_branch(5, 40.0, 100.0) == "+"
        assert outer_branch(500, 40.0, 100.0) == "-"
        x = 5 / math.sqrt(100.0**2 - 40.0**2)
        b, _ = asymptotic_bound(5, 40.0, 100.0, 3, 2, 2)
        assert_allclose(b, (61.0**-2 + x**2) / math.sqrt(100.0**2 - 40.0**2))

    def test_constants_scale_bound(self):
        table = {Regime.INNER: 2.0, Regime.MIDDLE: 3.0, Regime.OUTER: 5.0}
        b1, _ = asymptotic_bound(2, 9.0, 4.0, 3, 1, 1)
        b3, _ = asymptotic_bound(2, 9.0, 4.0, 3, 1, 1, table)
        assert_allclose(b3, 3.0 * b1)

    def test_validation(self):
        with pytest.raises(ValueError):
            asymptotic_bound(1, 1.0, -1.0, 3, 2, 2)
        with pytest.raises(ValueError):
            asymptotic_bound(1, 1.0, 1.0, 3, 5, 2)


@pytest.fixture(scope="module")
def table():
    return psi_table(3, SMALL.ls, SMALL.ms, SMALL.rs())


class TestFitting:
    def test_fit_bounds_every_point(self, table):
        C = fit_constants(3, 2, 2, SMALL, psi_values=table)
        assert all(np.isfinite(v) and v > 0 for v in C.C.values())
        for l, m, r in [(0, 0.0, 0.5), (4, 6.0, 3.0), (1, 2.0, 12.0)]:
            bound, _ = asymptotic_bound(l, m, r, 3, 2, 2, C)
            assert abs(psi(l, m, r, 3)) <= bound * (1 + 1e-9)

    def test_refinement_stability(self, table):
        a = fit_constants(3, 3, 2, SMALL, psi_values=table)
        b = fit_constants(3, 3, 2, SMALL.refined())
        for reg in Regime:
            assert abs(b.C[reg] / a.C[reg] - 1) <= 0.1

    def test_monotone_in_N1(self, table):
        c1 = fit_constants(3, 1, 2, SMALL, psi_values=table)
        c2 = fit_constants(3, 2, 2, SMALL, psi_values=table)
        gap = 1 + SMALL.r_max + SMALL.m_max
        for reg in Regime:
            assert c1.C[reg] <= c2.C[reg] * gap

    def test_zero_function(self, table):
        C = fit_constants(3, 2, 2, SMALL, psi_values=np.zeros_like(table))
        assert all(v == 0 for v in C.C.values())

    def test_extension_in_m(self, table):
        short = fit_constants(3, 3, 2, SMALL, psi_values=table)
        longer = fit_constants(3, 3, 2, SMALL.extended(24.0))
        for reg in (Regime.INNER, Regime.MIDDLE):
            assert longer.C[reg] <= 1.1 * short.C[reg]

    def test_csv_round_trip(self, table, tmp_path):
        C = fit_constants(3, 2, 2, SMALL, psi_values=table)
        path = tmp_path / "constants.csv"
        C.to_csv(path)
        back = ConstantsTable.read_csv(path)
        assert len(back) == 1
        assert back[0].grid_hash == SMALL.digest()
        for reg in Regime:
            assert back[0].C[reg] == C.C[reg]

    def test_digest_depends_on_grid(self):
        assert SMALL.digest() != SMALL.refined().digest()
