"""Radial multiplier identities and the weighted local energy integral.

The multiplier is ``X = f(r) d_r`` with ``f = r / (eps + r)`` (or ``f = 1``
when ``eps`` is ``None``).  For a real solution ``phi`` of the wave
equation the modified momentum density

    ``P_0 = phi_t f phi_r / 2 + tr(pi) phi phi_t / 4``
    ``P_i = (phi_i f phi_r - f (x_i / r) L / 2) / 2 + tr(pi) phi phi_i / 4 - d_i tr(pi) phi^2 / 8``

with ``L = -phi_t^2 + |grad phi|^2`` and ``tr(pi) = f' + (n - 1) f / r``
satisfies

    ``-d_t P_0 + sum_i d_i P_i = (f' phi_r^2 + (f / r) |angular grad phi|^2) / 2 - Delta(tr pi) phi^2 / 8``.

The right-hand side is non-negative when ``Delta(tr pi) <= 0``, which is
what makes the weighted space-time integral of ``|u|^2`` bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..harmonics import sphere_area
from ..propagator import FieldSampler
from ..specfun import composite_gauss_legendre
from .norms import time_rule

__all__ = [
    "Multiplier",
    "trpi",
    "lap_trpi",
    "morawetz_negativity_scan",
    "weighted_integral",
    "FrozenField",
    "field_jet",
    "divergence_residual",
    "verify_energy_momentum_identity",
]


@dataclass(frozen=True)
class Multiplier:
    """Radial weight ``f(r) = r / (eps + r)``; ``eps = None`` gives ``f = 1``."""

    n: int
    eps: float | None = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be at least 2")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")

    def f(self, r):
        r = np.asarray(r, dtype=float)
        return np.ones_like(r) if self.eps is None else r / (self.eps + r)

    def df(self, r):
        r = np.asarray(r, dtype=float)
        return np.zeros_like(r) if self.eps is None else self.eps / (self.eps + r) ** 2

    def trpi(self, r):
        """``tr(pi) = f' + (n - 1) f / r``."""
        r = np.asarray(r, dtype=float)
        if self.eps is None:
            return (self.n - 1) / r
        e = self.eps
        return e / (e + r) ** 2 + (self.n - 1) / (e + r)

    def dtrpi(self, r):
        """Radial derivative of ``tr(pi)``."""
        r = np.asarray(r, dtype=float)
        if self.eps is None:
            return -(self.n - 1) / r**2
        e = self.eps
        return -2 * e / (e + r) ** 3 - (self.n - 1) / (e + r) ** 2

    def d2trpi(self, r):
        r = np.asarray(r, dtype=float)
        if self.eps is None:
            return 2 * (self.n - 1) / r**3
        e = self.eps
        return 6 * e / (e + r) ** 4 + 2 * (self.n - 1) / (e + r) ** 3

    def lap_trpi(self, r):
        """``Delta tr(pi)`` in closed form (radial Laplacian in ``R^n``)."""
        r = np.asarray(r, dtype=float)
        n = self.n
        if self.eps is None:
            return -(n - 1) * (n - 3) / r**3
        e = self.eps
        num = e**2 * (n**2 - 1) + e * r * (2 * n**2 - 4 * n - 4) + r**2 * (n - 1) * (n - 3)
        return -num / (r * (e + r) ** 4)


def trpi(n: int, eps: float, r):
    """``tr(pi)`` for ``f = r / (eps + r)``."""
    return Multiplier(n, eps).trpi(r)


def lap_trpi(n: int, eps: float, r):
    """``Delta tr(pi)`` for ``f = r / (eps + r)``."""
    return Multiplier(n, eps).lap_trpi(r)


def morawetz_negativity_scan(n: int, eps: float, r_grid) -> float:
    """Largest value of ``Delta tr(pi)`` over ``r_grid``; non-positive means the zeroth-order term has a sign."""
    if n not in (3, 4):
        raise ValueError("the scan is defined for n = 3 and n = 4")
    if not eps > 0:
        raise ValueError("eps must be positive")
    r = np.asarray(r_grid, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radii must be positive")
    return float(np.max(lap_trpi(n, eps, r)))


def weighted_integral(fs: FieldSampler, eta: float, T_list, *, r_extra: float = 40.0,
                      per_unit_t: int = 2, per_unit_r: int = 16) -> np.ndarray:
    """``int_0^T int (1 + r)^{-1-eta} |u|^2 dx dt`` for each ``T`` in ``T_list``.

    The angular integral is exact by orthogonality, so only ``t`` and ``r``
    are discretised.  Windows are nested: the integral up to each ``T`` is
    accumulated from consecutive time panels.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    T_list = sorted(float(T) for T in T_list)
    if len(fs.modes) == 0:
        return np.zeros(len(T_list))
    n = fs.n
    out = []
    total = 0.0
    start = 0.0
    for T in T_list:
        if T > start:
            trule = time_rule(T, per_unit_t, start)
            R = T + r_extra + fs.modes.l_max / math.pi
            rr = composite_gauss_legendre(0.0, R, max(1, math.ceil(R)), order=per_unit_r)
            vol = sphere_area(n) * rr.weights * rr.nodes ** (n - 1) * (1 + rr.nodes) ** (-1 - eta)
            for a in range(0, trule.nodes.size, 16):
                c = fs.mode_coefficients(trule.nodes[a:a + 16], rr.nodes)
                dens = np.sum(np.abs(c) ** 2, axis=0) @ vol
                total += float(trule.weights[a:a + 16] @ dens)
            start = T
        out.append(total)
    return np.array(out)


# ---------------------------------------------------------------------------
# divergence identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrozenField:
    """The data ``u(t0)`` held fixed in time: not a solution, used as a negative control."""

    sampler: FieldSampler
    t0: float = 0.0

    @property
    def n(self) -> int:
        return self.sampler.n


def _tangential_gradients(fs: FieldSampler, omega: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Gradient of ``Y(x / |x|)`` at unit vectors ``omega``; shape ``(modes, points, n)``."""
    n = fs.n
    out = np.zeros((len(fs.modes), omega.shape[0], n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        vals = [fs.basis_values(omega + s * e) for s in (-2, -1, 1, 2)]
        out[:, :, j] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
    return out


def field_jet(field, t: float, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(phi, phi_t, grad phi)`` of ``phi = Re u`` at points ``x`` (shape ``(npoints, n)``)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    frozen = isinstance(field, FrozenField)
    fs = field.sampler if frozen else field
    t_eval = field.t0 if frozen else t
    r = np.linalg.norm(x, axis=1)
    if np.any(r == 0):
        raise ValueError("the origin is excluded")
    omega = x / r[:, None]
    c = fs.mode_coefficients([t_eval], r)[:, 0, :]
    cr = fs.mode_coefficients([t_eval], r, dr=1)[:, 0, :]
    Y = fs.basis_values(omega)
    gY = _tangential_gradients(fs, omega)
    phi = np.sum(c * Y, axis=0).real
    grad = (np.sum(cr * Y, axis=0)[:, None] * omega + np.einsum("mp,mpj->pj", c / r, gY)).real
    if frozen:
        phi_t = np.zeros_like(phi)
    else:
        ct = fs.mode_coefficients([t_eval], r, dt=1)[:, 0, :]
        phi_t = np.sum(ct * Y, axis=0).real
    return phi, phi_t, grad


def _momentum(field, weight: Multiplier, t: float, x: np.ndarray):
    """``(P_0, P_1..P_n)`` at points ``x``; returns arrays of shape ``(npoints,)`` and ``(npoints, n)``."""
    phi, phi_t, grad = field_jet(field, t, x)
    r = np.linalg.norm(x, axis=1)
    omega = x / r[:, None]
    f = weight.f(r)
    tp = weight.trpi(r)
    phi_r = np.sum(grad * omega, axis=1)
    L = -(phi_t**2) + np.sum(grad**2, axis=1)
    P0 = 0.5 * phi_t * f * phi_r + 0.25 * tp * phi * phi_t
    Pi = (0.5 * grad * (f * phi_r)[:, None] - 0.25 * (f * L)[:, None] * omega + 0.25 * (tp * phi)[:, None] * grad
          - 0.125 * (weight.dtrpi(r) * phi**2)[:, None] * omega)
    return P0, Pi


def divergence_residual(field, weight: Multiplier, t: float, x, h: float = 2e-3):
    """Pointwise ``(divergence, right-hand side, energy density)`` of the multiplier identity.

    The divergence ``-d_t P_0 + sum_i d_i P_i`` uses fourth-order central
    differences of step ``h``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    coef = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}
    div = np.zeros(x.shape[0])
    for s, w in coef.items():
        P0, _ = _momentum(field, weight, t + s * h, x)
        div -= w * P0 / h
        for j in range(n):
            xs = x.copy()
            xs[:, j] += s * h
            _, Pi = _momentum(field, weight, t, xs)
            div += w * Pi[:, j] / h
    phi, phi_t, grad = field_jet(field, t, x)
    r = np.linalg.norm(x, axis=1)
    omega = x / r[:, None]
    phi_r = np.sum(grad * omega, axis=1)
    ang = np.sum(grad**2, axis=1) - phi_r**2
    rhs = 0.5 * (weight.df(r) * phi_r**2 + weight.f(r) / r * ang) - 0.125 * weight.lap_trpi(r) * phi**2
    energy = 0.5 * (phi_t**2 + np.sum(grad**2, axis=1))
    return div, rhs, energy


def verify_energy_momentum_identity(field, sample_points, weight: Multiplier | None = None, *,
                                    h: float = 2e-3, r_min: float = 0.5) -> float:
    """Largest ``|divergence - rhs|`` over the samples, relative to the local energy density.

    ``sample_points`` is an array of rows ``(t, x_1, ..., x_n)``; rows with
    ``|x| < r_min`` are dropped.  The denominator is floored at ``1e-2``
    times the largest energy density among the samples.
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    n = field.n
    if pts.shape[1] != n + 1:
        raise ValueError("sample rows must hold (t, x_1, ..., x_n)")
    weight = weight or Multiplier(n, 1.0)
    keep = np.linalg.norm(pts[:, 1:], axis=1) >= r_min
    pts = pts[keep]
    if pts.size == 0:
        raise ValueError("no samples outside the excluded ball")
    div = np.zeros(len(pts))
    rhs = np.zeros(len(pts))
    energy = np.zeros(len(pts))
    for t in np.unique(pts[:, 0]):
        sel = pts[:, 0] == t
        div[sel], rhs[sel], energy[sel] = divergence_residual(field, weight, float(t), pts[sel, 1:], h)
    floor = 1e-2 * float(energy.max())
    if floor == 0:
        return 0.0
    return float(np.max(np.abs(div - rhs) / np.maximum(energy, floor)))
