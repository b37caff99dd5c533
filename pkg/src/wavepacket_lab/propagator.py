"""Free wave propagation of unit-frequency data, one spherical harmonic at a time.

Fourier convention: ``u(x) = int f^(xi) e^{2 pi i x.xi} dxi``.  Data are
stored as radial profiles of their harmonic coefficients,
``f^(rho w) = sum c^l_i(rho) Y^l_i(w)``, with the normalised harmonics of
:mod:`wavepacket_lab.harmonics`.  Under ``e^{sign * i t sqrt(-Delta)}`` the
coefficient of ``Y^l_i`` at radius ``r`` is

    ``c(t, r) = 2 pi i^l r^{(2-n)/2} int J_{(n-2)/2+l}(2 pi r rho)
    e^{2 pi i sign t rho} c^l_i(rho) rho^{n/2} d rho``.

``sign = -1`` is the default throughout (the ``e^{-it sqrt(-Delta)}``
evolution).  The spatial ``L^2`` norm is
``||u||^2 = |S^{n-1}| sum int |c^l_i(rho)|^2 rho^{n-1} d rho``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.special import gammaln

from .harmonics import (
    HarmonicIndex,
    SphereFunction,
    dim_Y,
    eval_basis,
    sphere_area,
    sphere_quadrature,
    smooth_step,
    zonal_profile_matrix,
)
from .specfun import (
    BesselOrder,
    QuadratureRule,
    bessel_j,
    bessel_j_orders,
    composite_gauss_legendre,
    gauss_legendre,
    oscillatory_integrate,
)

__all__ = [
    "SUPPORT",
    "bump",
    "window",
    "RadialProfile",
    "TabulatedProfile",
    "ModeSet",
    "FieldSampler",
    "WaveSolution",
    "rho_rule",
    "hankel_kernel",
    "hankel_mode",
    "evaluate_field",
    "make_radial_bump",
    "make_knapp",
    "make_random_localized",
    "make_zero",
    "split_half_waves",
    "knapp_lmax_floor",
]

#: Open interval carrying every unit-frequency profile.
SUPPORT = (0.5, 2.0)
_CENTER, _HALF = 1.25, 0.75


def bump(rho):
    """The fixed C-infinity bump ``exp(1 - 1/(1 - t^2))`` with ``t`` mapped from ``(1/2, 2)``."""
    t = (np.asarray(rho, dtype=float) - _CENTER) / _HALF
    inside = np.abs(t) < 1
    safe = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)


def window(rho):
    """Smooth cutoff equal to 1 on ``[1/2, 2]`` and supported in ``(1/4, 4)``."""
    rho = np.asarray(rho, dtype=float)
    return smooth_step((rho - 0.25) / 0.25) * smooth_step((4.0 - rho) / 2.0)


def rho_rule(frequency: float, interval=SUPPORT, min_panels: int = 8, order: int = 32) -> QuadratureRule:
    """Composite Gauss rule on ``interval`` with >= 8 nodes per oscillation of ``frequency``."""
    a, b = interval
    panels = max(min_panels, math.ceil(abs(frequency) * (b - a) * 8 / order))
    return composite_gauss_legendre(a, b, panels, order=order)


# ---------------------------------------------------------------------------
# radial profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    """``bump(rho) * sum_j a_j rho^{p_j} exp(i pi d_j rho / 2)``.

    ``terms`` holds ``(a_j, p_j, d_j)`` triples.  The bump confines every
    profile to :data:`SUPPORT`.
    """

    terms: tuple = ((1.0, 0.0, 0.0),)

    def __post_init__(self):
        object.__setattr__(
            self, "terms", tuple((complex(a), float(p), float(d)) for a, p, d in self.terms)
        )

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        b = bump(rho)
        safe = np.where(b > 0, rho, 1.0)
        total = np.zeros(rho.shape, dtype=complex)
        for a, p, d in self.terms:
            total = total + a * safe**p * np.exp(0.5j * np.pi * d * safe)
        return b * total

    def scaled(self, factor: complex) -> "RadialProfile":
        return RadialProfile(tuple((a * factor, p, d) for a, p, d in self.terms))

    def times_power(self, power: float, factor: complex = 1.0) -> "RadialProfile":
        """Multiply by ``factor * rho**power``."""
        return RadialProfile(tuple((a * factor, p + power, d) for a, p, d in self.terms))

    def __add__(self, other):
        if isinstance(other, RadialProfile):
            return RadialProfile(self.terms + other.terms)
        return NotImplemented

    @property
    def is_zero(self) -> bool:
        return all(a == 0 for a, _, _ in self.terms)


def _canonical_rule() -> QuadratureRule:
    return composite_gauss_legendre(*SUPPORT, 16, order=32)


@dataclass(frozen=True)
class TabulatedProfile:
    """Profile known at the nodes of the canonical 16 x 32 Gauss grid on :data:`SUPPORT`.

    Values between nodes come from the degree-31 interpolant of each panel.
    This is the form in which profiles are read back from CSV.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (16 * 32,):
            raise ValueError("tabulated profiles need 512 samples on the canonical grid")
        object.__setattr__(self, "values", vals)

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        out = np.zeros(rho.shape, dtype=complex)
        rule = _canonical_rule()
        a, b = SUPPORT
        width = (b - a) / 16
        panel = np.floor((rho - a) / width).astype(int)
        inside = (rho > a) & (rho < b)
        for p in np.unique(panel[inside]):
            sel = inside & (panel == p)
            nodes = rule.nodes[32 * p:32 * (p + 1)]
            vals = self.values[32 * p:32 * (p + 1)]
            interp_re = BarycentricInterpolator(nodes, vals.real)
            interp_im = BarycentricInterpolator(nodes, vals.imag)
            out[sel] = interp_re(rho[sel]) + 1j * interp_im(rho[sel])
        return out

    def scaled(self, factor: complex) -> "TabulatedProfile":
        return TabulatedProfile(self.values * factor)

    def times_power(self, power: float, factor: complex = 1.0) -> "TabulatedProfile":
        return TabulatedProfile(self.values * factor * _canonical_rule().nodes**power)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)


# ---------------------------------------------------------------------------
# mode sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeSet:
    """Unit-frequency data as a map ``HarmonicIndex -> radial profile``.

    ``N`` records the dyadic angular localisation (``None`` if absent);
    ``meta`` carries generator parameters (seed, eps, ...) for reports.
    """

    n: int
    profiles: Mapping[HarmonicIndex, object] = field(default_factory=dict)
    N: int | None = None
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for idx, prof in dict(self.profiles).items():
            if not isinstance(idx, HarmonicIndex):
                idx = HarmonicIndex(self.n, *idx)
            if idx.n != self.n:
                raise ValueError("index dimension mismatch")
            clean[idx] = prof
        if self.N is not None:
            for idx in clean:
                if not (self.N / 2 < idx.l < 4 * self.N):
                    raise ValueError(f"mode l={idx.l} outside the support of the N={self.N} cutoff")
        object.__setattr__(self, "profiles", MappingProxyType(dict(sorted(clean.items()))))
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    @property
    def indices(self) -> list[HarmonicIndex]:
        return list(self.profiles)

    @property
    def l_max(self) -> int:
        return max((idx.l for idx in self.profiles), default=0)

    @property
    def is_zonal(self) -> bool:
        return all(idx.is_zonal for idx in self.profiles)

    def __len__(self):
        return len(self.profiles)

    def profile_matrix(self, rho) -> np.ndarray:
        """Profile values, shape ``(modes, len(rho))``."""
        rho = np.asarray(rho, dtype=float)
        if not self.profiles:
            return np.zeros((0, rho.size), dtype=complex)
        return np.stack([p(rho) for p in self.profiles.values()])

    def energy(self) -> float:
        """``||f||^2_{L^2(R^n)}`` from the Fourier side."""
        rule = rho_rule(0.0, min_panels=16)
        vals = self.profile_matrix(rule.nodes)
        per_mode = (np.abs(vals) ** 2 * rule.nodes ** (self.n - 1)) @ rule.weights
        return float(sphere_area(self.n) * per_mode.sum())

    def norm(self) -> float:
        return math.sqrt(self.energy())

    def map_profiles(self, fn, **meta) -> "ModeSet":
        return ModeSet(self.n, {i: fn(i, p) for i, p in self.profiles.items()}, self.N, {**self.meta, **meta})

    def scaled(self, factor: complex) -> "ModeSet":
        return self.map_profiles(lambda _, p: p.scaled(factor))

    def restrict(self, keep) -> "ModeSet":
        keep = set(keep)
        return ModeSet(self.n, {i: p for i, p in self.profiles.items() if i in keep}, self.N, self.meta)

    def sphere_function(self, rho: float) -> SphereFunction:
        """The angular function ``w -> f^(rho w)`` at one radius."""
        return SphereFunction(self.n, {(i.l, i.i): complex(p(np.array([rho]))[0]) for i, p in self.profiles.items()})

    def angular_norms(self, s: float) -> tuple[float, float]:
        """``(||f||_{L^2}, ||f||_{H^s_Omega})`` over ``R^n``.

        ``H^s_Omega`` weights the degree-``l`` part by ``1 + [l(n+l-2)]^s``.
        """
        rule = rho_rule(0.0, min_panels=16)
        vals = self.profile_matrix(rule.nodes)
        per_mode = sphere_area(self.n) * (np.abs(vals) ** 2 * rule.nodes ** (self.n - 1)) @ rule.weights
        ls = np.array([i.l for i in self.profiles], dtype=float)
        lam = ls * (self.n + ls - 2)
        weight = 1.0 + lam**s
        return math.sqrt(per_mode.sum()), math.sqrt((weight * per_mode).sum())

    # -- serialisation ----------------------------------------------------
    def to_records(self):
        rule = _canonical_rule()
        rows = []
        for idx, prof in self.profiles.items():
            vals = prof(rule.nodes)
            for j, v in enumerate(vals):
                rows.append((self.n, idx.l, idx.i, j, float(v.real), float(v.imag)))
        return rows

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "l", "i", "rho_node", "re", "im"])
            for row in self.to_records():
                w.writerow([row[0], row[1], row[2], row[3], repr(row[4]), repr(row[5])])

    @classmethod
    def from_csv(cls, path, N: int | None = None) -> "ModeSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["n", "l", "i", "rho_node", "re", "im"]:
                raise ValueError(f"unexpected header {header}")
            data: dict = {}
            n = None
            for row in reader:
                n_row, l, i, j = (int(x) for x in row[:4])
                if n is None:
                    n = n_row
                elif n != n_row:
                    raise ValueError("mixed dimensions in mode file")
                data.setdefault((l, i), np.zeros(512, dtype=complex))[j] = complex(float(row[4]), float(row[5]))
        if n is None:
            raise ValueError("empty mode file")
        return cls(n, {HarmonicIndex(n, l, i): TabulatedProfile(v) for (l, i), v in data.items()}, N)


# ---------------------------------------------------------------------------
# kernels and single-mode transforms
# ---------------------------------------------------------------------------


def hankel_kernel(n: int, l: int, r, rho, *, derivative: bool = False) -> np.ndarray:
    """``r^{(2-n)/2} J_{(n-2)/2+l}(2 pi r rho)`` (or its ``r``-derivative) on the grid ``r x rho``.

    The ``r = 0`` column uses the limit of the series: ``(pi rho)^s / Gamma(s+1)``
    for ``l = 0`` and zero otherwise.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    table = _kernel_table(n, [l], r, rho, derivative=derivative)
    return table[0]


def _kernel_table(n: int, ls: Sequence[int], r: np.ndarray, rho: np.ndarray, *, derivative: bool = False):
    """Kernels for every ``l`` in ``ls``; shape ``(len(ls), len(r), len(rho))``."""
    ls = list(ls)
    s0 = BesselOrder.for_mode(n, 0)
    top = max(ls) + 2
    a = (2 - n) / 2
    z = 2 * np.pi * r[:, None] * rho[None, :]
    ladder = bessel_j_orders(s0, top, z)
    out = np.empty((len(ls), r.size, rho.size))
    zero = r == 0
    pos = ~zero
    ra = np.where(pos, r, 1.0) ** a
    for row, l in enumerate(ls):
        s = s0.s + l
        if derivative:
            # d/dr [r^a J_s(2 pi r rho)] = r^a [(l / r) J_s - 2 pi rho J_{s+1}]
            val = (l / np.where(pos, r, 1.0))[:, None] * ladder[l] - 2 * np.pi * rho[None, :] * ladder[l + 1]
            out[row] = ra[:, None] * val
            if np.any(zero):
                # limit at r = 0 of the derivative: only l = 1 survives (for a + s = l)
                lim = (np.pi * rho) ** s / math.exp(gammaln(s + 1)) if l == 1 else 0.0 * rho
                out[row, zero] = lim
        else:
            out[row] = ra[:, None] * ladder[l]
            if np.any(zero):
                lim = (np.pi * rho) ** s / math.exp(gammaln(s + 1)) if l == 0 else 0.0 * rho
                out[row, zero] = lim
    return out


def hankel_mode(idx: HarmonicIndex, profile, t: float, r: float, *, sign: int = -1,
                rtol: float = 1e-10) -> complex:
    """Coefficient ``c^l_i(t, r)`` of one mode by adaptive oscillatory quadrature.

    Independent of the bulk engine in :class:`FieldSampler`; used as its oracle.
    """
    n, l = idx.n, idx.l
    s = BesselOrder.for_mode(n, l)
    if r < 0:
        raise ValueError("r must be non-negative")
    if r == 0:
        if l != 0:
            return 0.0j

        def amp(rho):
            return (np.pi * rho) ** s.s / math.exp(gammaln(s.s + 1)) * profile(rho) * rho ** (n / 2)
        pref = 2 * np.pi
    else:
        def amp(rho):
            return bessel_j(s, 2 * np.pi * r * rho) * profile(rho) * rho ** (n / 2)
        pref = 2 * np.pi * r ** ((2 - n) / 2)
    val = oscillatory_integrate(amp, sign * t, gauss_legendre(32, *SUPPORT), bandwidth=r, rtol=rtol)
    return complex(pref * (1j) ** l * val)


# ---------------------------------------------------------------------------
# bulk evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldSampler:
    """Evaluates ``e^{sign i t sqrt(-Delta)} f`` for ``f`` given by a :class:`ModeSet`.

    The core product is :meth:`mode_coefficients`, which returns
    ``c^l_i(t, r)`` on a tensor grid.  All modes of equal degree share one
    Bessel kernel, and the ``rho`` quadrature is chosen from the largest
    ``|t| + r`` requested, so the result is quadrature-accurate.
    """

    modes: ModeSet
    sign: int = -1
    max_block: int = 2 * 10**7

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def n(self) -> int:
        return self.modes.n

    def _rule(self, t, r) -> QuadratureRule:
        tmax = float(np.max(np.abs(t))) if np.size(t) else 0.0
        rmax = float(np.max(r)) if np.size(r) else 0.0
        return rho_rule(tmax + rmax + 2.0, min_panels=8)

    def mode_coefficients(self, t, r, *, dt: int = 0, dr: int = 0) -> np.ndarray:
        """``c^l_i(t, r)`` (or a first ``t``/``r`` derivative) for every mode.

        Returns an array of shape ``(modes, len(t), len(r))`` ordered as
        ``self.modes.indices``.
        """
        if dt + dr > 1:
            raise ValueError("only first derivatives are available")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0):
            raise ValueError("radii must be non-negative")
        idx = self.modes.indices
        out = np.zeros((len(idx), t.size, r.size), dtype=complex)
        if not idx:
            return out
        n = self.n
        rule = self._rule(t, r)
        rho, w = rule.nodes, rule.weights
        prof = self.modes.profile_matrix(rho) * (rho ** (n / 2) * w)[None, :]
        if dt:
            prof = prof * (2j * np.pi * self.sign * rho)[None, :]
        phase = np.exp(2j * np.pi * self.sign * np.outer(t, rho))
        groups: dict[int, list[int]] = {}
        for k, h in enumerate(idx):
            groups.setdefault(h.l, []).append(k)
        ls = sorted(groups)
        per_r = (max(ls) + 3) * rho.size
        chunk = max(1, self.max_block // per_r)
        # weighted data times phase for every (mode, t): (modes, t, rho)
        g = prof[:, None, :] * phase[None, :, :]
        for a in range(0, r.size, chunk):
            rr = r[a:a + chunk]
            table = _kernel_table(n, ls, rr, rho, derivative=bool(dr))
            for row, l in enumerate(ls):
                kern = table[row]
                ks = groups[l]
                gl = g[ks].reshape(-1, rho.size)
                block = kern @ gl.real.T + 1j * (kern @ gl.imag.T)
                out[ks, :, a:a + chunk] = (2 * np.pi * (1j) ** l) * block.T.reshape(len(ks), t.size, rr.size)
        return out

    def basis_values(self, omega) -> np.ndarray:
        """``Y`` of each mode at ``omega``; shape ``(modes, npoints)``."""
        pts = np.asarray(omega, dtype=float).reshape(-1, self.n)
        return np.stack([eval_basis(h, pts) for h in self.modes.indices]) if len(self.modes) else np.zeros((0, len(pts)))

    def field(self, t, r, omega, *, dt: int = 0, dr: int = 0) -> np.ndarray:
        """``u`` on the tensor grid ``t x r x omega``; shape ``(len(t), len(r), npoints)``."""
        c = self.mode_coefficients(t, r, dt=dt, dr=dr)
        y = self.basis_values(omega)
        return np.einsum("mtr,mp->trp", c, y)

    def at_points(self, t: float, x, *, dt: int = 0) -> np.ndarray:
        """``u(t, x)`` at Cartesian points ``x`` (shape ``(npoints, n)``)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        omega = np.where(r[:, None] > 0, x / np.where(r > 0, r, 1.0)[:, None], np.eye(self.n)[-1])
        c = self.mode_coefficients([t], r, dt=dt)[:, 0, :]
        y = self.basis_values(omega)
        return np.sum(c * y, axis=0)

    def energy(self, t, *, radial_extent: float | None = None, panels_per_unit: int = 1) -> np.ndarray:
        """``||u(t)||^2_{L^2}`` by radial quadrature, for each ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        extent = radial_extent if radial_extent is not None else float(np.max(np.abs(t))) + 40.0
        rule = composite_gauss_legendre(0.0, extent, max(1, math.ceil(extent * panels_per_unit)), order=24)
        c = self.mode_coefficients(t, rule.nodes)
        dens = np.sum(np.abs(c) ** 2, axis=0) * rule.nodes ** (self.n - 1)
        return sphere_area(self.n) * dens @ rule.weights


def evaluate_field(fs: FieldSampler, t, r, omega) -> complex:
    """``u(t, r omega)`` at a single point."""
    val = fs.field([t], [r], np.asarray(omega, dtype=float).reshape(1, -1))
    return complex(val[0, 0, 0])


@dataclass(frozen=True)
class WaveSolution:
    """``u = e^{+it sqrt(-Delta)} h_plus + e^{-it sqrt(-Delta)} h_minus``."""

    plus: ModeSet
    minus: ModeSet

    def samplers(self):
        return FieldSampler(self.plus, sign=1), FieldSampler(self.minus, sign=-1)

    def at_points(self, t, x, *, dt: int = 0):
        a, b = self.samplers()
        return a.at_points(t, x, dt=dt) + b.at_points(t, x, dt=dt)


def split_half_waves(f: ModeSet, g: ModeSet) -> tuple[ModeSet, ModeSet]:
    """Half-wave data ``h_pm = f/2 pm (2 i sqrt(-Delta))^{-1} g``.

    ``sqrt(-Delta)`` acts as ``2 pi rho``, so ``g`` is multiplied by
    ``pm 1/(4 pi i rho)`` per mode.  ``h_plus`` evolves with
    ``e^{+it sqrt(-Delta)}``.
    """
    if f.n != g.n:
        raise ValueError("dimension mismatch")
    keys = sorted(set(f.profiles) | set(g.profiles))
    plus, minus = {}, {}
    for k in keys:
        pf = f.profiles.get(k)
        pg = g.profiles.get(k)
        parts_p, parts_m = [], []
        if pf is not None:
            parts_p.append(pf.scaled(0.5))
            parts_m.append(pf.scaled(0.5))
        if pg is not None:
            parts_p.append(pg.times_power(-1.0, 1.0 / (4j * np.pi)))
            parts_m.append(pg.times_power(-1.0, -1.0 / (4j * np.pi)))
        plus[k] = _sum_profiles(parts_p)
        minus[k] = _sum_profiles(parts_m)
    return ModeSet(f.n, plus, None, {"split": True}), ModeSet(f.n, minus, None, {"split": True})


def _sum_profiles(parts):
    out = parts[0]
    for p in parts[1:]:
        if isinstance(out, RadialProfile) and isinstance(p, RadialProfile):
            out = out + p
        else:
            rule = _canonical_rule()
            out = TabulatedProfile(out(rule.nodes) + p(rule.nodes))
    return out


# ---------------------------------------------------------------------------
# data generators
# ---------------------------------------------------------------------------


def make_zero(n: int) -> ModeSet:
    return ModeSet(n, {}, None, {"generator": "zero"})


def make_radial_bump(n: int) -> ModeSet:
    """Single ``l = 0`` mode whose profile is the fixed bump."""
    return ModeSet(n, {HarmonicIndex(n, 0, 0): RadialProfile()}, None, {"generator": "radial_bump"})


def knapp_lmax_floor(eps: float) -> int:
    """Smallest admissible harmonic truncation for a Knapp block of width ``eps``."""
    return math.ceil(4.0 / eps)


def make_knapp(n: int, eps: float, l_max: int | None = None, quad_degree: int | None = None) -> ModeSet:
    """Zonal Knapp-type data: ``bump(|xi|) * exp(-alpha^2 / (2 (eps/2)^2))``.

    ``alpha`` is the angle between ``xi`` and the pole axis (the last
    coordinate axis).  The angular factor is projected onto zonal harmonics
    up to ``l_max`` (default ``ceil(12/eps)``) with Gauss quadrature in
    ``cos(alpha)`` of degree ``quad_degree >= 2 l_max + 8``.
    """
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    if n not in (2, 3, 4):
        raise ValueError("dimension must be 2, 3 or 4")
    if l_max is None:
        l_max = math.ceil(12.0 / eps)
    floor = knapp_lmax_floor(eps)
    if l_max < floor:
        raise ValueError(f"eps={eps} needs l_max >= {floor} (got {l_max})")
    degree = max(quad_degree or 0, 2 * l_max + 8, 200)
    quad = sphere_quadrature(n, degree, zonal=True)
    # the zonal axis is e_1 on the circle and e_n otherwise
    x = quad.nodes[:, 0] if n == 2 else quad.nodes[:, -1]
    weights = quad.weights
    alpha = np.arccos(np.clip(x, -1, 1))
    profile = np.exp(-(alpha**2) / (2 * (eps / 2) ** 2))
    zon = zonal_profile_matrix(n, l_max, x)
    coeff = (zon * weights) @ profile / sphere_area(n)
    modes = {}
    for l in range(l_max + 1):
        if abs(coeff[l]) > 0:
            modes[HarmonicIndex.zonal(n, l)] = RadialProfile(((coeff[l], 0.0, 0.0),))
    return ModeSet(n, modes, None, {"generator": "knapp", "eps": eps, "l_max": l_max,
                                    "angular_width": eps / 2})


def make_random_localized(n: int, N: int, seed: int, *, modes: int = 8, degree: int = 4) -> ModeSet:
    """Random data at angular frequency ``N``: degrees ``N <= l < 2N``.

    Up to ``modes`` distinct ``(l, i)`` pairs are drawn; each radial profile
    is the bump times a random trigonometric polynomial
    ``sum_{|d| <= degree} a_d exp(i pi d rho / 2)``.  The result is scaled
    to unit ``L^2`` norm.  Uses the counter-based Philox generator.
    """
    if N < 1:
        raise ValueError("N must be a positive dyadic integer")
    rng = np.random.Generator(np.random.Philox(seed))
    pool = []
    for l in range(N, 2 * N):
        if n == 4:
            pool.append((l, HarmonicIndex.zonal(4, l).i))
        else:
            pool.extend((l, i) for i in range(dim_Y(n, l)))
    take = min(modes, len(pool))
    chosen = sorted(pool[k] for k in rng.choice(len(pool), size=take, replace=False))
    profiles = {}
    for l, i in chosen:
        a = rng.normal(size=2 * degree + 1) + 1j * rng.normal(size=2 * degree + 1)
        profiles[HarmonicIndex(n, l, i)] = RadialProfile(
            tuple((a[k], 0.0, float(d)) for k, d in enumerate(range(-degree, degree + 1)))
        )
    raw = ModeSet(n, profiles, N, {"generator": "random_localized", "seed": seed})
    return raw.scaled(1.0 / raw.norm())
