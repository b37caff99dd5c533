"""Spherical harmonics on S^{n-1} for n = 2, 3, 4 and the angular calculus.

Conventions
-----------
The sphere carries the normalised inner product
``<F, G> = |S^{n-1}|^{-1} int F conj(G) dw`` so an orthonormal basis has
``<Y, Y> = 1`` and the addition theorem reads
``sum_i |Y^l_i(w)|^2 = dim_Y(n, l)``.

Basis choices:

* ``n = 2``: ``1`` for ``l = 0``; ``sqrt(2) cos(l t)`` (``i = 0``) and
  ``sqrt(2) sin(l t)`` (``i = 1``) for ``l >= 1``.
* ``n = 3``: real spherical harmonics; index ``i = m + l`` with
  ``-l <= m <= l``.  ``m > 0`` carries ``cos(m phi)``, ``m < 0`` carries
  ``sin(|m| phi)``, and the zonal function is ``i = l``.
* ``n = 4``: zonal functions only, ``i = 0``, about a pole axis.

Points on the sphere are passed as Cartesian arrays of shape ``(..., n)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import minimize
from scipy.special import roots_gegenbauer, roots_legendre

from .specfun import gegenbauer

__all__ = [
    "HarmonicIndex",
    "AngularQuadrature",
    "SphereFunction",
    "ZERO",
    "BERNSTEIN_CONSTANT",
    "sphere_area",
    "dim_Y",
    "eigenvalue",
    "indices",
    "eval_basis",
    "basis_matrix",
    "sphere_quadrature",
    "addition_theorem_residual",
    "omega_power",
    "hs_omega_norm",
    "theta0",
    "smooth_step",
    "dyadic_project",
    "bernstein_ratio",
]

SUPPORTED_DIMENSIONS = (2, 3, 4)

#: Sentinel for the constant ("zero frequency") dyadic piece.
ZERO = "zero"

#: Upper bound for :func:`bernstein_ratio` on dyadically localised data.
#: Cauchy-Schwarz with the addition theorem bounds the ratio by
#: ``sqrt(sum_{l < 4N} dim_Y(n, l)) / N^{(n-1)/2}``, which is below 6 for
#: n <= 4 and every dyadic N >= 1.
BERNSTEIN_CONSTANT = 6.0


def sphere_area(n: int) -> float:
    """``|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)``."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def dim_Y(n: int, l: int) -> int:
    """Dimension of the degree-``l`` spherical harmonics on ``S^{n-1}``."""
    if n < 2 or l < 0:
        raise ValueError("need n >= 2 and l >= 0")
    if l == 0:
        return 1
    # (1/l)(n + 2l - 2) binom(n + l - 3, l - 1); the division is exact
    num = (n + 2 * l - 2) * math.comb(n + l - 3, l - 1)
    assert num % l == 0
    return num // l


def eigenvalue(n: int, l: int) -> float:
    """Eigenvalue ``l (n + l - 2)`` of ``-Delta_sph`` on degree ``l``."""
    if n < 2 or l < 0:
        raise ValueError("need n >= 2 and l >= 0")
    return float(l * (n + l - 2))


@dataclass(frozen=True, order=True)
class HarmonicIndex:
    n: int
    l: int
    i: int = 0

    def __post_init__(self):
        if self.n not in SUPPORTED_DIMENSIONS:
            raise ValueError(f"dimension {self.n} not supported")
        if self.l < 0:
            raise ValueError("degree must be non-negative")
        if not 0 <= self.i < dim_Y(self.n, self.l):
            raise ValueError(f"index i={self.i} out of range for n={self.n}, l={self.l}")

    @classmethod
    def zonal(cls, n: int, l: int) -> "HarmonicIndex":
        return cls(n, l, l if n == 3 else 0)

    @property
    def is_zonal(self) -> bool:
        if self.n == 3:
            return self.i == self.l
        if self.n == 2:
            return self.l == 0
        return self.i == 0


def indices(n: int, l_max: int, zonal_only: bool = False) -> list[HarmonicIndex]:
    """All supported indices with ``l <= l_max`` in ascending ``(l, i)`` order."""
    return list(_index_table(n, l_max, bool(zonal_only))[0])


@lru_cache(maxsize=64)
def _index_table(n: int, l_max: int, zonal_only: bool):
    out = []
    for l in range(l_max + 1):
        if zonal_only or n == 4:
            out.append(HarmonicIndex.zonal(n, l))
        else:
            out.extend(HarmonicIndex(n, l, i) for i in range(dim_Y(n, l)))
    ls = np.array([h.l for h in out])
    ms = np.array([h.i - h.l for h in out]) if n == 3 else np.zeros(len(out), dtype=int)
    ls.flags.writeable = False
    ms.flags.writeable = False
    return tuple(out), ls, ms


# ---------------------------------------------------------------------------
# basis evaluation
# ---------------------------------------------------------------------------


def _unit(points, n):
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != n:
        raise ValueError(f"points must have trailing dimension {n}")
    norm = np.linalg.norm(pts, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("zero vector is not a point of the sphere")
    return pts / norm


def _default_pole(n):
    pole = np.zeros(n)
    pole[-1] = 1.0
    return pole


def _normalized_legendre(l_max: int, x: np.ndarray) -> np.ndarray:
    """``Pbar[l, m]`` with ``int_{-1}^1 Pbar^2 dx = 2`` (no Condon-Shortley phase)."""
    x = np.asarray(x, dtype=float)
    u = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    out = np.zeros((l_max + 1, l_max + 1) + x.shape)
    out[0, 0] = 1.0
    for m in range(1, l_max + 1):
        out[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * u * out[m - 1, m - 1]
    for m in range(l_max):
        out[m + 1, m] = math.sqrt(2 * m + 3) * x * out[m, m]
    for l in range(2, l_max + 1):
        m = np.arange(l - 1)
        a = np.sqrt((4.0 * l * l - 1) / (l * l - m * m))
        b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
        a = a.reshape((-1,) + (1,) * x.ndim)
        b = b.reshape(a.shape)
        out[l, : l - 1] = a * (x * out[l - 1, : l - 1] - b * out[l - 2, : l - 1])
    return out


def _zonal_values(n: int, l: int, cos_theta: np.ndarray) -> np.ndarray:
    lam = (n - 2) / 2
    if n == 2:
        return np.sqrt(2.0 if l else 1.0) * np.cos(l * np.arccos(np.clip(cos_theta, -1, 1)))
    x = np.clip(cos_theta, -1.0, 1.0)
    return math.sqrt(dim_Y(n, l)) * gegenbauer(l, lam, x) / gegenbauer(l, lam, 1.0)


def eval_basis(idx: HarmonicIndex, omega, pole=None) -> np.ndarray:
    """Evaluate ``Y^l_i`` at points ``omega`` (shape ``(..., n)``).

    ``pole`` sets the symmetry axis of zonal functions for ``n = 4``;
    other dimensions use the fixed frame described in the module docstring.
    """
    n, l, i = idx.n, idx.l, idx.i
    w = _unit(omega, n)
    if n == 2:
        th = np.arctan2(w[..., 1], w[..., 0])
        if l == 0:
            return np.ones(w.shape[:-1])
        return math.sqrt(2.0) * (np.cos(l * th) if i == 0 else np.sin(l * th))
    if n == 3:
        m = i - l
        x = w[..., 2]
        phi = np.arctan2(w[..., 1], w[..., 0])
        pbar = _normalized_legendre(l, x)[l, abs(m)]
        if m == 0:
            return pbar
        trig = np.cos(m * phi) if m > 0 else np.sin(-m * phi)
        return math.sqrt(2.0) * pbar * trig
    if not idx.is_zonal:
        raise ValueError("only zonal harmonics are available for n = 4")
    axis = _default_pole(4) if pole is None else _unit(pole, 4)
    return _zonal_values(4, l, w @ axis)


def basis_matrix(n: int, l_max: int, omega, zonal_only: bool = False, pole=None):
    """Values of every basis function with ``l <= l_max`` at ``omega``.

    Returns ``(index_list, values)`` with ``values`` of shape
    ``(len(index_list), npoints)``; rows follow :func:`indices`.
    """
    w = _unit(omega, n).reshape(-1, n)
    table, ls, ms = _index_table(n, l_max, bool(zonal_only))
    idx = list(table)
    vals = np.empty((len(idx), w.shape[0]))
    if n == 2:
        th = np.arctan2(w[:, 1], w[:, 0])
        for row, h in enumerate(idx):
            if h.l == 0:
                vals[row] = 1.0
            else:
                vals[row] = math.sqrt(2.0) * (np.cos(h.l * th) if h.i == 0 else np.sin(h.l * th))
        return idx, vals
    if n == 3:
        x = w[:, 2]
        phi = np.arctan2(w[:, 1], w[:, 0])
        pbar = _normalized_legendre(l_max, x)
        am = np.abs(ms)
        k = np.arange(l_max + 1)[:, None] * phi[None, :]
        # rows of the trig table: 1, sqrt2 cos(m phi) for m >= 1, sqrt2 sin(m phi) for m >= 1
        table = np.concatenate([np.ones((1, phi.size)), math.sqrt(2.0) * np.cos(k[1:]), math.sqrt(2.0) * np.sin(k[1:])])
        trow = np.where(ms > 0, ms, np.where(ms < 0, l_max - ms, 0))
        vals[:] = pbar[ls, am] * table[trow]
        return idx, vals
    axis = _default_pole(4) if pole is None else _unit(pole, 4)
    vals[:] = zonal_profile_matrix(4, l_max, w @ axis)
    return idx, vals


def zonal_profile_matrix(n: int, l_max: int, cos_theta) -> np.ndarray:
    """Zonal basis values as functions of ``cos(theta)``; shape ``(l_max+1, npts)``.

    For ``n = 2`` the "zonal" function of degree ``l`` is ``sqrt(2) cos(l theta)``.
    """
    x = np.clip(np.asarray(cos_theta, dtype=float).ravel(), -1.0, 1.0)
    out = np.empty((l_max + 1, x.size))
    if n == 2:
        th = np.arccos(x)
        for l in range(l_max + 1):
            out[l] = (math.sqrt(2.0) if l else 1.0) * np.cos(l * th)
        return out
    lam = (n - 2) / 2
    prev = np.ones_like(x)
    out[0] = prev
    if l_max >= 1:
        cur = 2 * lam * x
        for l in range(1, l_max + 1):
            if l > 1:
                k = l - 1
                prev, cur = cur, (2 * (k + lam) * x * cur - (k + 2 * lam - 1) * prev) / (k + 1)
            out[l] = cur
    for l in range(l_max + 1):
        c1 = math.comb(l + n - 3, l) if n > 2 else 1  # C_l^lam(1) = binom(l + 2 lam - 1, l)
        out[l] *= math.sqrt(dim_Y(n, l)) / c1
    return out


# ---------------------------------------------------------------------------
# quadrature on the sphere
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AngularQuadrature:
    """Nodes and weights on ``S^{n-1}``; weights sum to ``|S^{n-1}|``.

    ``zonal`` quadratures (n = 4) only integrate functions of ``w . pole``;
    their nodes lie on a great circle through the pole.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    zonal: bool = False

    @property
    def size(self) -> int:
        return self.weights.size

    def integrate(self, values) -> complex | float:
        return np.tensordot(np.asarray(values), self.weights, axes=([-1], [0]))

    def mean(self, values):
        return self.integrate(values) / sphere_area(self.n)


def sphere_quadrature(n: int, degree: int, *, zonal: bool = False) -> AngularQuadrature:
    """Quadrature on ``S^{n-1}`` exact for polynomials of total degree ``degree``.

    ``n = 2``: trapezoid with ``degree + 1`` equispaced nodes.
    ``n = 3``: Gauss-Legendre in ``cos(theta)`` times the trapezoid in ``phi``
    (with ``zonal=True`` a single azimuth is used, exact for zonal integrands).
    ``n = 4``: Gauss-Gegenbauer in ``cos(theta)``; zonal integrands only.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if n == 2:
        m = degree + 1
        th = 2 * np.pi * np.arange(m) / m
        nodes = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return AngularQuadrature(2, nodes, np.full(m, 2 * np.pi / m), degree)
    k = degree // 2 + 1
    if n == 3:
        x, w = roots_legendre(k)
        if zonal:
            nodes = np.stack([np.sqrt(1 - x * x), np.zeros_like(x), x], axis=-1)
            return AngularQuadrature(3, nodes, 2 * np.pi * w, degree, zonal=True)
        m = degree + 1
        phi = 2 * np.pi * np.arange(m) / m
        st = np.sqrt(1 - x * x)
        nodes = np.stack(
            [
                np.outer(st, np.cos(phi)).ravel(),
                np.outer(st, np.sin(phi)).ravel(),
                np.repeat(x, m),
            ],
            axis=-1,
        )
        weights = np.outer(w, np.full(m, 2 * np.pi / m)).ravel()
        return AngularQuadrature(3, nodes, weights, degree)
    if n == 4:
        x, w = roots_gegenbauer(k, 1.0)
        nodes = np.zeros((k, 4))
        nodes[:, 0] = np.sqrt(1 - x * x)
        nodes[:, 3] = x
        return AngularQuadrature(4, nodes, 4 * np.pi * w, degree, zonal=True)
    raise ValueError(f"dimension {n} not supported")


def addition_theorem_residual(n: int, l: int, sample_points) -> float:
    """``max_w |sum_i Y^l_i(w)^2 - dim_Y| / dim_Y`` over ``sample_points``."""
    if n not in (2, 3):
        raise ValueError("full bases exist for n = 2 and n = 3 only")
    pts = _unit(sample_points, n).reshape(-1, n)
    total = np.zeros(pts.shape[0])
    if n == 3:
        x = pts[:, 2]
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        pbar = _normalized_legendre(l, x)[l]
        total += pbar[0] ** 2
        for m in range(1, l + 1):
            total += 2 * pbar[m] ** 2 * (np.cos(m * phi) ** 2 + np.sin(m * phi) ** 2)
    else:
        for i in range(dim_Y(n, l)):
            total += eval_basis(HarmonicIndex(n, l, i), pts) ** 2
    d = dim_Y(n, l)
    return float(np.max(np.abs(total - d)) / d)


# ---------------------------------------------------------------------------
# sphere functions and the angular calculus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereFunction:
    """Finite expansion ``F = sum c^l_i Y^l_i`` on ``S^{n-1}``."""

    n: int
    coefficients: Mapping[tuple[int, int], complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, value in dict(self.coefficients).items():
            if isinstance(key, HarmonicIndex):
                if key.n != self.n:
                    raise ValueError("index dimension mismatch")
                key = (key.l, key.i)
            else:
                HarmonicIndex(self.n, *key)
            clean[(int(key[0]), int(key[1]))] = complex(value)
        object.__setattr__(self, "coefficients", MappingProxyType(dict(sorted(clean.items()))))

    @property
    def l_max(self) -> int:
        return max((l for l, _ in self.coefficients), default=0)

    def norm(self) -> float:
        """Normalised ``L^2(S^{n-1})`` norm, ``sqrt(sum |c|^2)``."""
        return math.sqrt(sum(abs(c) ** 2 for c in self.coefficients.values()))

    def map(self, factor) -> "SphereFunction":
        """Multiply each coefficient by ``factor(l)``."""
        return SphereFunction(self.n, {k: c * factor(k[0]) for k, c in self.coefficients.items()})

    def __call__(self, omega, pole=None) -> np.ndarray:
        pts = np.asarray(omega, dtype=float)
        keys = [k for k, c in self.coefficients.items() if c != 0]
        if not keys:
            return np.zeros(pts.shape[:-1], dtype=complex)
        l_max = max(l for l, _ in keys)
        if self.n == 3:
            return _evaluate_sphere3(self.coefficients, l_max, pts)
        zonal = self.n == 4 or all(HarmonicIndex(self.n, *k).is_zonal for k in keys)
        idx = indices(self.n, l_max, zonal_only=zonal)
        row = {(h.l, h.i): k for k, h in enumerate(idx)}
        coef = np.zeros(len(idx), dtype=complex)
        for key in keys:
            coef[row[key]] = self.coefficients[key]
        flat = pts.reshape(-1, self.n)
        out = np.empty(flat.shape[0], dtype=complex)
        step = max(1, 2**22 // len(idx))
        for a in range(0, flat.shape[0], step):
            _, vals = basis_matrix(self.n, l_max, flat[a:a + step], zonal_only=zonal, pole=pole)
            out[a:a + step] = coef.real @ vals + 1j * (coef.imag @ vals)
        return out.reshape(pts.shape[:-1])

    def to_records(self) -> list[tuple[int, int, int, float, float]]:
        return [(self.n, l, i, c.real, c.imag) for (l, i), c in self.coefficients.items()]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "l", "i", "re", "im"])
            for row in self.to_records():
                writer.writerow([row[0], row[1], row[2], repr(row[3]), repr(row[4])])

    @classmethod
    def from_records(cls, rows: Iterable) -> "SphereFunction":
        rows = list(rows)
        if not rows:
            raise ValueError("empty record list")
        n = int(rows[0][0])
        coeffs = {}
        for row in rows:
            if int(row[0]) != n:
                raise ValueError("mixed dimensions in records")
            coeffs[(int(row[1]), int(row[2]))] = complex(float(row[3]), float(row[4]))
        return cls(n, coeffs)

    @classmethod
    def from_csv(cls, path) -> "SphereFunction":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["n", "l", "i", "re", "im"]:
                raise ValueError(f"unexpected header {header}")
            return cls.from_records(reader)


def _evaluate_sphere3(coefficients, l_max: int, pts: np.ndarray) -> np.ndarray:
    return _sphere3_evaluator(coefficients, l_max)(pts)


def _sphere3_evaluator(coefficients, l_max: int):
    # sum over l first for each azimuthal order m, then over m
    ccos = np.zeros((l_max + 1, l_max + 1), dtype=complex)
    csin = np.zeros_like(ccos)
    for (l, i), c in coefficients.items():
        if c == 0:
            continue
        m = i - l
        if m >= 0:
            ccos[l, m] = c * (math.sqrt(2.0) if m else 1.0)
        else:
            csin[l, -m] = c * math.sqrt(2.0)

    def evaluate(pts):
        pts = np.asarray(pts, dtype=float)
        w = _unit(pts, 3).reshape(-1, 3)
        out = np.empty(w.shape[0], dtype=complex)
        step = max(1, 2**23 // (l_max + 1) ** 2)
        for a in range(0, w.shape[0], step):
            chunk = w[a:a + step]
            phi = np.arctan2(chunk[:, 1], chunk[:, 0])
            pbar = _normalized_legendre(l_max, chunk[:, 2])
            k = np.arange(l_max + 1)[:, None] * phi[None, :]
            acos = np.einsum("lm,lmp->mp", ccos.real, pbar) + 1j * np.einsum("lm,lmp->mp", ccos.imag, pbar)
            asin = np.einsum("lm,lmp->mp", csin.real, pbar) + 1j * np.einsum("lm,lmp->mp", csin.imag, pbar)
            out[a:a + step] = np.sum(acos * np.cos(k) + asin * np.sin(k), axis=0)
        return out.reshape(pts.shape[:-1])

    return evaluate


def omega_power(F: SphereFunction, s: float) -> SphereFunction:
    """Apply ``|Omega|^s``: ``c^l_i -> [l(n + l - 2)]^{s/2} c^l_i``.

    The constant mode is killed for ``s > 0``, kept for ``s = 0`` and
    rejected for ``s < 0`` (when its coefficient is nonzero).
    """
    if s < 0 and F.coefficients.get((0, 0), 0) != 0:
        raise ValueError("negative powers of |Omega| are undefined on constants")
    if s == 0:
        return F
    return F.map(lambda l: eigenvalue(F.n, l) ** (s / 2) if l else 0.0)


def hs_omega_norm(F: SphereFunction, s: float) -> float:
    """``sqrt(||F||^2 + || |Omega|^s F ||^2)``."""
    if s < 0:
        raise ValueError("s must be non-negative")
    return math.sqrt(F.norm() ** 2 + omega_power(F, s).norm() ** 2)


def smooth_step(u):
    """C-infinity step: 0 for ``u <= 0``, 1 for ``u >= 1``."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        g0 = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        v = 1.0 - u
        g1 = np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)
    return g0 / (g0 + g1)


def theta0(x):
    """Dyadic cutoff: 1 on ``[1, 2]``, smooth, supported in ``(1/2, 4)``."""
    x = np.asarray(x, dtype=float)
    rise = smooth_step((x - 0.5) / 0.5)
    fall = smooth_step((4.0 - x) / 2.0)
    return rise * fall


def dyadic_project(F: SphereFunction, j) -> SphereFunction:
    """Angular Littlewood-Paley piece ``F_{2^j}`` (``j = ZERO`` for constants)."""
    if j == ZERO:
        return SphereFunction(F.n, {k: c for k, c in F.coefficients.items() if k[0] == 0})
    if int(j) != j or j < 0:
        raise ValueError("j must be a non-negative integer or ZERO")
    scale = 2.0 ** (-int(j))
    return F.map(lambda l: float(theta0(scale * l)))


def bernstein_ratio(F: SphereFunction, N: float, quad: AngularQuadrature, refine: int = 4) -> float:
    """``||F||_inf / (N^{(n-1)/2} ||F||_2)`` with the sup found on ``quad``.

    The grid maximum is polished by a local optimisation started from the
    ``refine`` largest nodes.  Should not exceed :data:`BERNSTEIN_CONSTANT`
    for data localised at dyadic ``N``.
    """
    l2 = F.norm()
    if l2 == 0:
        raise ValueError("zero function has no Bernstein ratio")
    n = F.n
    if quad.n != n:
        raise ValueError("quadrature dimension mismatch")
    if n == 3:
        F = _sphere3_evaluator(F.coefficients, max(F.l_max, 0))
    vals = np.abs(F(quad.nodes))
    best = float(vals.max())
    order = np.argsort(vals)[::-1][:refine]

    if n == 2:
        def to_point(p):
            return np.array([math.cos(p[0]), math.sin(p[0])])

        starts = [np.array([math.atan2(quad.nodes[k, 1], quad.nodes[k, 0])]) for k in order]
    elif n == 3:
        def to_point(p):
            st = math.sin(p[0])
            return np.array([st * math.cos(p[1]), st * math.sin(p[1]), math.cos(p[0])])

        starts = [
            np.array([math.acos(np.clip(quad.nodes[k, 2], -1, 1)), math.atan2(quad.nodes[k, 1], quad.nodes[k, 0])])
            for k in order
        ]
    else:
        def to_point(p):
            return np.array([math.sin(p[0]), 0.0, 0.0, math.cos(p[0])])

        starts = [np.array([math.acos(np.clip(quad.nodes[k, 3], -1, 1))]) for k in order]

    for p0 in starts:
        res = minimize(lambda p: -abs(F(to_point(p))), p0, method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-12, "maxiter": 200})
        best = max(best, -float(res.fun))
    return best / (N ** ((n - 1) / 2) * l2)
