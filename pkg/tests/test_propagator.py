import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.special import roots_legendre

from wavepacket_lab.harmonics import HarmonicIndex, dyadic_project, eval_basis
from wavepacket_lab.propagator import (
    FieldSampler,
    ModeSet,
    RadialProfile,
    TabulatedProfile,
    WaveSolution,
    bump,
    evaluate_field,
    hankel_kernel,
    hankel_mode,
    knapp_lmax_floor,
    make_knapp,
    make_radial_bump,
    make_random_localized,
    make_zero,
    split_half_waves,
    window,
)


def gl(a, b, k):
    x, w = roots_legendre(k)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def fourier_inversion_3d_radial(r, profile=bump, k=400):
    """``int f^(xi) e^{2 pi i x.xi} dxi`` for radial data by a polar tensor grid."""
    rho, wr = gl(0.5, 2.0, k)
    th, wt = gl(0.0, math.pi, k)
    phase = np.exp(2j * np.pi * r * np.outer(rho, np.cos(th)))
    integrand = profile(rho)[:, None] * phase * (2 * np.pi * np.sin(th))[None, :] * (rho**2)[:, None]
    return complex(wr @ integrand @ wt)


def fourier_inversion_2d(modes: ModeSet, x, k=300, m=512):
    """Cartesian inversion on the plane by brute-force polar quadrature."""
    rho, wr = gl(0.5, 2.0, k)
    th = 2 * np.pi * np.arange(m) / m
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    fhat = np.zeros((k, m), dtype=complex)
    for idx, prof in modes.profiles.items():
        fhat += np.outer(prof(rho), eval_basis(idx, dirs))
    out = []
    for p in np.atleast_2d(x):
        phase = np.exp(2j * np.pi * np.outer(rho, dirs @ p))
        out.append((wr * rho) @ (fhat * phase).sum(axis=1) * 2 * np.pi / m)
    return np.array(out)


def random_points(n, count, radius, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(count, n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * radius * rng.uniform(0, 1, size=(count, 1))


class TestProfiles:
    def test_bump_support(self):
        rho = np.linspace(0, 3, 3001)
        b = bump(rho)
        assert np.all(b[(rho <= 0.5) | (rho >= 2)] == 0)
        assert_allclose(bump(1.25), 1.0)

    def test_window(self):
        rho = np.linspace(0, 5, 2001)
        w = window(rho)
        assert np.all(w[(rho >= 0.5) & (rho <= 2)] == 1)
        assert np.all(w[(rho <= 0.25) | (rho >= 4)] == 0)

    def test_profile_algebra(self):
        p = RadialProfile(((1.0, 0.0, 2.0),))
        rho = np.linspace(0.6, 1.9, 7)
        assert_allclose(p.times_power(-1.0, 2.0)(rho), 2 * p(rho) / rho)
        assert_allclose((p + p.scaled(1j))(rho), (1 + 1j) * p(rho))

    def test_tabulated_interpolation(self):
        p = RadialProfile(((1.0, 1.0, 3.0), (0.5j, 0.0, -2.0)))
        from wavepacket_lab.propagator import _canonical_rule

        tab = TabulatedProfile(p(_canonical_rule().nodes))
        rho = np.linspace(0.4, 2.1, 301)
        assert_allclose(tab(rho), p(rho), atol=1e-10)


class TestModeSet:
    def test_cutoff_support_enforced(self):
        with pytest.raises(ValueError):
            ModeSet(3, {HarmonicIndex(3, 1, 0): RadialProfile()}, N=4)

    def test_energy_of_bump(self):
        rho, w = gl(0.5, 2.0, 200)
        ref = 4 * math.pi * np.sum(w * bump(rho) ** 2 * rho**2)
        assert_allclose(make_radial_bump(3).energy(), ref, rtol=1e-12)

    def test_csv_round_trip(self, tmp_path):
        f = make_random_localized(3, 4, seed=11)
        path = tmp_path / "modes.csv"
        f.to_csv(path)
        g = ModeSet.from_csv(path, N=4)
        assert g.indices == f.indices
        rho = np.linspace(0.55, 1.95, 50)
        assert_allclose(g.profile_matrix(rho), f.profile_matrix(rho), atol=1e-10)

    def test_csv_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            ModeSet.from_csv(path)


class TestHankelMode:
    @pytest.mark.parametrize("n, l", [(3, 1), (3, 5), (4, 2), (2, 3)])
    def test_vanishes_at_origin(self, n, l):
        idx = HarmonicIndex.zonal(n, l) if n != 2 else HarmonicIndex(2, l, 0)
        assert hankel_mode(idx, RadialProfile(), 3.0, 0.0) == 0

    def test_radial_bump_against_fourier_inversion(self):
        idx = HarmonicIndex(3, 0, 0)
        val = hankel_mode(idx, RadialProfile(), 0.0, 1.0)
        assert abs(val - fourier_inversion_3d_radial(1.0)) <= 1e-7

    def test_origin_value_is_fourier_volume(self):
        idx = HarmonicIndex(3, 0, 0)
        rho, w = gl(0.5, 2.0, 200)
        ref = 4 * math.pi * np.sum(w * bump(rho) * rho**2)
        assert_allclose(hankel_mode(idx, RadialProfile(), 0.0, 0.0), ref, rtol=1e-10)

    @pytest.mark.parametrize("l", [0, 3])
    def test_conjugation_symmetry(self, l):
        idx = HarmonicIndex.zonal(3, l)
        p = RadialProfile(((1.0 + 0.5j, 0.0, 3.0), (-0.2j, 1.0, -1.0)))
        q = RadialProfile(tuple((a.conjugate(), pw, -d) for a, pw, d in p.terms))
        a = hankel_mode(idx, p, 7.5, 4.0)
        b = hankel_mode(idx, q, -7.5, 4.0)
        # the prefactor i^l picks up (-1)^l under conjugation
        assert_allclose(b, (-1) ** l * np.conj(a), rtol=1e-10)

    @pytest.mark.parametrize("n, l", [(2, 0), (2, 7), (3, 0), (3, 4), (3, 16), (4, 0), (4, 9)])
    def test_engine_matches_adaptive_quadrature(self, n, l):
        idx = HarmonicIndex.zonal(n, l) if n != 2 else HarmonicIndex(2, l, 0)
        p = RadialProfile(((1.0, 0.0, 1.0), (0.3j, 2.0, -3.0)))
        fs = FieldSampler(ModeSet(n, {idx: p}))
        ts = np.array([0.0, 2.5, 17.0, -9.0])
        rs = np.array([0.0, 0.3, 3.0, 16.5, 30.0])
        got = fs.mode_coefficients(ts, rs)[0]
        for a, t in enumerate(ts):
            for b, r in enumerate(rs):
                assert_allclose(got[a, b], hankel_mode(idx, p, t, r), atol=1e-10)

    def test_kernel_derivative(self):
        r = np.array([0.0, 0.7, 3.1])
        rho = np.array([0.6, 1.2, 1.9])
        for l in (0, 1, 4):
            h = 1e-5
            d = hankel_kernel(3, l, r, rho, derivative=True)
            fd = (hankel_kernel(3, l, r + h, rho) - hankel_kernel(3, l, np.abs(r - h), rho)) / (2 * h)
            mask = r > 0
            assert_allclose(d[mask], fd[mask], atol=1e-7)
        # one-sided limit at the origin for l = 1
        h = 1e-6
        fd0 = (hankel_kernel(3, 1, [h], rho) - hankel_kernel(3, 1, [0.0], rho)) / h
        assert_allclose(hankel_kernel(3, 1, [0.0], rho, derivative=True), fd0, rtol=1e-5)


class TestFieldSampler:
    def test_random_points_against_fourier_inversion(self):
        f = make_random_localized(2, 2, seed=3)
        fs = FieldSampler(f)
        x = random_points(2, 20, 4.0, seed=1)
        got = fs.at_points(0.0, x)
        ref = fourier_inversion_2d(f, x)
        scale = np.max(np.abs(ref))
        assert np.max(np.abs(got - ref)) <= 1e-6 * scale

    def test_radial_symmetry(self):
        fs = FieldSampler(make_radial_bump(3))
        w = np.array([[0, 0, 1.0], [0.6, 0.0, 0.8], [-1, 0, 0]])
        vals = fs.field([5.0], [4.3], w)[0, 0]
        assert_allclose(vals, vals[0], rtol=1e-12)
        assert_allclose(evaluate_field(fs, 5.0, 4.3, w[1]), vals[0], rtol=1e-12)

    @pytest.mark.parametrize(
        "make",
        [
            lambda: make_radial_bump(3),
            lambda: make_radial_bump(2),
            lambda: make_random_localized(3, 8, seed=2),
            lambda: make_random_localized(2, 4, seed=5),
            lambda: make_knapp(3, 0.25),
        ],
    )
    def test_energy_conservation(self, make):
        f = make()
        e = FieldSampler(f).energy([0.0, 1.0, 4.0, 16.0, 32.0])
        assert np.max(np.abs(np.sqrt(e / f.energy()) - 1)) <= 1e-3

    def test_mode_decoupling(self):
        f = make_random_localized(3, 4, seed=7)
        keep = f.indices[:3]
        ts, rs = [3.0, 11.0], [0.5, 4.0, 10.0]
        full = FieldSampler(f).mode_coefficients(ts, rs)[:3]
        part = FieldSampler(f.restrict(keep)).mode_coefficients(ts, rs)
        assert_allclose(full, part, atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(t1=st.floats(-10, 10), t2=st.floats(-10, 10))
    def test_time_composition(self, t1, t2):
        idx = HarmonicIndex.zonal(3, 2)
        p = RadialProfile(((1.0, 0.0, 1.0),))
        # e^{-2 pi i t1 rho} = exp(i pi d rho / 2) with d = -4 t1
        q = RadialProfile(((1.0, 0.0, 1.0 - 4 * t1),))
        rs = [0.5, 3.0, 9.0]
        a = FieldSampler(ModeSet(3, {idx: p})).mode_coefficients([t1 + t2], rs)
        b = FieldSampler(ModeSet(3, {idx: q})).mode_coefficients([t2], rs)
        assert_allclose(a, b, atol=1e-9)

    def test_zero_data(self):
        fs = FieldSampler(make_zero(3))
        assert fs.mode_coefficients([1.0], [1.0]).shape == (0, 1, 1)
        assert_allclose(fs.at_points(1.0, [[1.0, 0, 0]]), 0.0)


class TestRadialBump:
    @pytest.mark.parametrize("t", [8.0, 16.0, 32.0])
    def test_shell_localisation(self, t):
        fs = FieldSampler(make_radial_bump(3))
        r = np.arange(0, t + 20, 1 / 16)
        c = np.abs(fs.mode_coefficients([t], r)[0, 0])
        assert abs(r[np.argmax(c)] - t) <= 2

    def test_dispersive_decay(self):
        fs = FieldSampler(make_radial_bump(3))
        scaled = []
        for t in (8.0, 16.0, 32.0):
            r = np.arange(0, t + 20, 1 / 16)
            scaled.append(np.abs(fs.mode_coefficients([t], r)).max() * t)
        # t * sup |u| is flat once the shell has separated from the origin
        assert max(scaled) / min(scaled) <= 1.1


class TestHalfWaves:
    def test_zero_velocity(self):
        f = make_random_localized(3, 4, seed=1)
        hp, hm = split_half_waves(f, make_zero(3))
        rho = np.linspace(0.6, 1.9, 11)
        assert_allclose(hp.profile_matrix(rho), 0.5 * f.profile_matrix(rho))
        assert_allclose(hm.profile_matrix(rho), 0.5 * f.profile_matrix(rho))

    def test_zero_position(self):
        g = make_random_localized(3, 4, seed=1)
        hp, hm = split_half_waves(make_zero(3), g)
        rho = np.linspace(0.6, 1.9, 11)
        assert_allclose(hp.profile_matrix(rho), -hm.profile_matrix(rho))

    def test_reconstruction(self):
        f = make_random_localized(3, 4, seed=1)
        g = make_random_localized(3, 4, seed=2)
        u = WaveSolution(*split_half_waves(f, g))
        x = random_points(3, 10, 5.0, seed=4)
        assert_allclose(u.at_points(0.0, x), FieldSampler(f).at_points(0.0, x), atol=1e-8)
        assert_allclose(u.at_points(0.0, x, dt=1), FieldSampler(g).at_points(0.0, x), atol=1e-8)


class TestRandomData:
    @pytest.mark.parametrize("n, N", [(2, 4), (3, 8), (4, 16)])
    def test_normalised(self, n, N):
        assert_allclose(make_random_localized(n, N, seed=0).norm(), 1.0, atol=1e-10)

    def test_deterministic(self):
        a = make_random_localized(3, 8, seed=42)
        b = make_random_localized(3, 8, seed=42)
        c = make_random_localized(3, 8, seed=43)
        rho = np.linspace(0.6, 1.9, 5)
        assert a.indices == b.indices
        assert np.array_equal(a.profile_matrix(rho), b.profile_matrix(rho))
        assert not np.array_equal(a.profile_matrix(rho), c.profile_matrix(rho)) or a.indices != c.indices

    def test_dyadic_support(self):
        N = 8
        f = make_random_localized(3, N, seed=9)
        F = f.sphere_function(1.1)
        assert dyadic_project(F, int(math.log2(N))) == F


class TestKnapp:
    def test_floor(self):
        assert knapp_lmax_floor(1 / 16) == 64
        with pytest.raises(ValueError):
            make_knapp(3, 1 / 16, l_max=40)

    def test_zonal(self):
        assert make_knapp(4, 0.25).is_zonal

    @pytest.mark.parametrize("n", [3, 4])
    def test_origin_value_is_fourier_volume(self, n):
        eps = 0.25
        f = make_knapp(n, eps)
        rho, w = gl(0.5, 2.0, 200)
        radial = np.sum(w * bump(rho) * rho ** (n - 1))
        a, wa = gl(0.0, math.pi, 2000)
        dens = np.exp(-(a**2) / (2 * (eps / 2) ** 2))
        sphere = 2 * math.pi if n == 3 else 4 * math.pi
        angular = np.sum(wa * dens * np.sin(a) ** (n - 2)) * sphere
        got = FieldSampler(f).at_points(0.0, np.zeros((1, n)))[0]
        assert_allclose(got, radial * angular, rtol=1e-9)

    def test_peak_persists_on_knapp_region(self):
        eps = 0.25
        fs = FieldSampler(make_knapp(3, eps))
        u0 = abs(fs.at_points(0.0, np.zeros((1, 3)))[0])
        t = eps**-2 / 4
        z = np.linspace(t - 3, t + 3, 121)
        peak = np.abs(fs.at_points(t, np.stack([0 * z, 0 * z, z], axis=1))).max()
        assert u0 / 3 <= peak <= 3 * u0

    @pytest.mark.parametrize("s", [0.5, 1.0])
    def test_angular_norm_scaling(self, s):
        eps = [1 / 4, 1 / 8, 1 / 16]
        ratios = []
        for e in eps:
            l2, hs = make_knapp(4, e).angular_norms(s)
            ratios.append(hs / l2)
        slope = np.polyfit(np.log(eps), np.log(ratios), 1)[0]
        assert abs(slope + s) <= 0.1
