"""Space-time norms of propagated unit-frequency data.

All spatial integrals are done in polar coordinates: Gauss-Legendre panels
in ``r`` times a tensor quadrature on the sphere (Gauss-Legendre in
``cos(theta)`` and the trapezoid rule in the azimuth).  Because the field
is a short sum of separable terms ``c(t, r) A(cos theta) B(phi)``, values
on the tensor grid come from a single contraction per time node.

At time ``t`` a unit-frequency solution built from degrees ``l <= L``
lives, up to rapidly decaying tails, in the shell
``|t| - W <= r <= sqrt(t^2 + (L / pi)^2) + W``.  Norm routines integrate
over that shell and report the share of ``||u(t)||^2`` that falls outside
it, so that a too-narrow window is visible rather than silent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.special import j0, roots_gegenbauer, roots_legendre

from ..harmonics import HarmonicIndex, eval_basis, sphere_area, zonal_profile_matrix
from ..propagator import SUPPORT, FieldSampler, ModeSet
from ..specfun import QuadratureRule, composite_gauss_legendre

__all__ = [
    "EvaluationGrid",
    "SphereGrid",
    "sphere_grid",
    "shell_window",
    "radial_rule",
    "time_rule",
    "angular_degree",
    "lr_norm",
    "lr_norms",
    "mixed_norm",
    "sup_norm",
    "sup_over_sphere",
    "cube_masses",
    "dual_scale_norm",
    "AxisymmetricField",
]

#: Half-width of the radial window around the light cone.
WINDOW = 12.0


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereGrid:
    """Tensor quadrature on ``S^{n-1}``: polar nodes ``x`` (``cos theta``) times azimuths ``phi``.

    ``weights[j, k]`` sum to ``|S^{n-1}|``.  For ``n = 2`` the polar axis is
    trivial (``x`` has one entry); zonal grids have one azimuth and
    integrate only functions of ``cos theta``.
    """

    n: int
    x: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    degree: int
    zonal: bool = False

    @property
    def size(self) -> int:
        return self.weights.size

    def points(self) -> np.ndarray:
        """Cartesian nodes, shape ``(len(x), len(phi), n)``."""
        if self.n == 2:
            return np.stack([np.cos(self.phi), np.sin(self.phi)], axis=-1)[None, :, :]
        st = np.sqrt(np.clip(1 - self.x**2, 0, None))
        if self.n == 3:
            return np.stack(
                [np.outer(st, np.cos(self.phi)), np.outer(st, np.sin(self.phi)), np.repeat(self.x[:, None], self.phi.size, 1)],
                axis=-1,
            )
        pts = np.zeros((self.x.size, 1, 4))
        pts[:, 0, 0] = st
        pts[:, 0, 3] = self.x
        return pts

    def factors(self, indices) -> tuple[np.ndarray, np.ndarray]:
        """Separable factors ``A[mode, j]``, ``B[mode, k]`` with ``Y = A * B`` on the grid."""
        M = len(indices)
        A = np.ones((M, self.x.size))
        B = np.ones((M, self.phi.size))
        for row, h in enumerate(indices):
            if self.n == 2:
                B[row] = eval_basis(h, np.stack([np.cos(self.phi), np.sin(self.phi)], axis=-1))
            elif self.n == 3:
                m = h.i - h.l
                if self.zonal and m != 0:
                    raise ValueError("zonal grids only carry zonal modes")
                # the polar factor is the m >= 0 basis function on the meridian phi = 0
                mer = np.stack([np.sqrt(np.clip(1 - self.x**2, 0, None)), 0 * self.x, self.x], axis=-1)
                A[row] = eval_basis(HarmonicIndex(3, h.l, h.l + abs(m)), mer)
                if m != 0:
                    A[row] /= math.sqrt(2.0)
                    B[row] = math.sqrt(2.0) * (np.cos(m * self.phi) if m > 0 else np.sin(-m * self.phi))
            else:
                A[row] = zonal_profile_matrix(4, h.l, self.x)[h.l]
        return A, B


@lru_cache(maxsize=64)
def sphere_grid(n: int, degree: int, zonal: bool = False) -> SphereGrid:
    """Tensor quadrature exact for polynomials of degree ``degree`` (zonal ones if ``zonal``)."""
    if n == 2:
        m = degree + 1
        phi = 2 * np.pi * np.arange(m) / m
        return SphereGrid(2, np.zeros(1), phi, np.full((1, m), 2 * np.pi / m), degree)
    k = degree // 2 + 1
    if n == 3:
        x, w = roots_legendre(k)
        if zonal:
            return SphereGrid(3, x, np.zeros(1), (2 * np.pi * w)[:, None], degree, True)
        m = degree + 1
        phi = 2 * np.pi * np.arange(m) / m
        return SphereGrid(3, x, phi, np.outer(w, np.full(m, 2 * np.pi / m)), degree)
    if n == 4:
        x, w = roots_gegenbauer(k, 1.0)
        return SphereGrid(4, x, np.zeros(1), (4 * np.pi * w)[:, None], degree, True)
    raise ValueError(f"dimension {n} not supported")


def angular_degree(l_max: int, power: float) -> int:
    """Quadrature degree used for ``int |u|^p dw`` with ``u`` of degree ``l_max``."""
    if not np.isfinite(power):
        return 4 * l_max + 16
    return int(math.ceil(power / 2)) * (l_max + 1) + l_max + 16


def _grid_for(modes: ModeSet, degree: int) -> SphereGrid:
    zonal = modes.n == 4 or (modes.n == 3 and modes.is_zonal)
    return sphere_grid(modes.n, degree, zonal)


def shell_window(t: float, l_max: int, width: float = WINDOW, r_max: float | None = None) -> tuple[float, float]:
    """Radial interval holding the solution at time ``t``."""
    lo = max(0.0, abs(t) - width)
    hi = math.hypot(t, l_max / math.pi) + width
    if r_max is not None:
        hi = min(hi, r_max)
    return lo, hi


def radial_rule(a: float, b: float, per_unit: int = 16) -> QuadratureRule:
    """Unit-length Gauss panels on ``[a, b]``."""
    panels = max(1, math.ceil(b - a))
    return composite_gauss_legendre(a, b, panels, order=per_unit)


def time_rule(T: float, per_unit: int = 2, t0: float = 0.0) -> QuadratureRule:
    """Gauss rule on ``[t0, T]`` with ``per_unit`` nodes per unit time (16-node panels)."""
    order = 16
    panels = max(1, math.ceil((T - t0) * per_unit / order))
    return composite_gauss_legendre(t0, T, panels, order=order)


@dataclass(frozen=True)
class EvaluationGrid:
    """Time, radial and angular resolution for a norm computation.

    ``window`` is the half-width of the shell around the light cone (``None``
    integrates the whole radial interval ``[0, r_max]``).
    """

    times: QuadratureRule | None = None
    radial_per_unit: int = 16
    degree: int | None = None
    window: float | None = WINDOW
    r_max: float | None = None
    mu: float | None = None

    def __post_init__(self):
        if self.radial_per_unit < 2:
            raise ValueError("need at least two radial nodes per unit")
        if self.mu is not None and not 0 < self.mu <= 1:
            raise ValueError("cube scale mu must lie in (0, 1]")

    def radial(self, t: float, l_max: int) -> QuadratureRule:
        if self.window is None:
            if self.r_max is None:
                raise ValueError("a radial extent is needed without a window")
            return radial_rule(0.0, self.r_max, self.radial_per_unit)
        return radial_rule(*shell_window(t, l_max, self.window, self.r_max), self.radial_per_unit)


# ---------------------------------------------------------------------------
# field values on tensor grids
# ---------------------------------------------------------------------------


def _values(fs: FieldSampler, t: float, r: np.ndarray, grid: SphereGrid, factors=None, dt: int = 0) -> np.ndarray:
    """``u(t, r, x_j, phi_k)`` with shape ``(len(r), len(x), len(phi))``."""
    A, B = factors if factors is not None else grid.factors(fs.modes.indices)
    c = fs.mode_coefficients([t], r, dt=dt)[:, 0, :]
    return np.einsum("mr,mj,mk->rjk", c, A, B, optimize=True)


def _chunks(count: int, per_row: int, budget: int = 2**22):
    step = max(1, budget // max(per_row, 1))
    for a in range(0, count, step):
        yield slice(a, min(count, a + step))


def lr_norms(fs: FieldSampler, times, power: float, grid: EvaluationGrid | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``||u(t)||_{L^p(R^n)}`` for each ``t`` and the energy share outside the radial window.

    ``power = inf`` returns the maximum over the quadrature nodes.
    """
    grid = grid or EvaluationGrid()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    modes = fs.modes
    n = modes.n
    L = modes.l_max
    total = modes.energy()
    out = np.zeros(times.size)
    missing = np.zeros(times.size)
    if len(modes) == 0:
        return out, missing
    sgrid = _grid_for(modes, grid.degree or angular_degree(L, power))
    factors = sgrid.factors(modes.indices)
    for a, t in enumerate(times):
        rule = grid.radial(t, L)
        acc = 0.0
        energy = 0.0
        for sl in _chunks(rule.nodes.size, sgrid.size):
            r, w = rule.nodes[sl], rule.weights[sl]
            mag = np.abs(_values(fs, t, r, sgrid, factors))
            vol = w * r ** (n - 1)
            energy += float(vol @ np.einsum("rjk,jk->r", mag**2, sgrid.weights))
            if np.isinf(power):
                acc = max(acc, float(mag.max()))
            else:
                acc += float(vol @ np.einsum("rjk,jk->r", mag**power, sgrid.weights))
        out[a] = acc if np.isinf(power) else acc ** (1 / power)
        missing[a] = max(0.0, 1 - energy / total) if total > 0 else 0.0
    return out, missing


def lr_norm(fs, t: float, power: float, grid: EvaluationGrid | None = None) -> float:
    """``||u(t)||_{L^p(R^n)}`` by polar quadrature.

    ``fs`` is a :class:`FieldSampler` or any object with attributes ``n``
    and ``field(t, r, omega) -> array (len(t), len(r), npoints)``; the
    latter requires ``grid`` with ``window=None`` and ``degree`` set.
    """
    if isinstance(fs, FieldSampler):
        return float(lr_norms(fs, [t], power, grid)[0][0])
    if grid is None or grid.degree is None:
        raise ValueError("generic fields need an explicit grid")
    sgrid = sphere_grid(fs.n, grid.degree)
    pts = sgrid.points().reshape(-1, fs.n)
    rule = grid.radial(t, 0)
    vals = np.abs(fs.field([t], rule.nodes, pts)[0]).reshape(rule.nodes.size, *sgrid.weights.shape)
    if np.isinf(power):
        return float(vals.max())
    ang = np.einsum("rjk,jk->r", vals**power, sgrid.weights)
    return float((rule.weights * rule.nodes ** (fs.n - 1)) @ ang) ** (1 / power)


def mixed_norm(fs, q: float, power: float, time_window, grid: EvaluationGrid | None = None,
               per_unit: int = 2) -> float:
    """``(int_0^T ||u(t)||_{L^p}^q dt)^{1/q}``.

    ``time_window`` is ``T`` or a pair ``(t0, T)``; the time rule comes from
    ``grid.times`` when set.
    """
    if q < 1 or not np.isfinite(q):
        raise ValueError("q must be finite and >= 1")
    grid = grid or EvaluationGrid()
    t0, T = (0.0, float(time_window)) if np.isscalar(time_window) else map(float, time_window)
    rule = grid.times or time_rule(T, per_unit, t0)
    if isinstance(fs, FieldSampler):
        vals = lr_norms(fs, rule.nodes, power, grid)[0]
    else:
        vals = np.array([lr_norm(fs, t, power, grid) for t in rule.nodes])
    return float(rule.weights @ vals**q) ** (1 / q)


# ---------------------------------------------------------------------------
# sup norms
# ---------------------------------------------------------------------------


def _polar_to_point(n: int, p) -> np.ndarray:
    if n == 2:
        return np.array([math.cos(p[0]), math.sin(p[0])])
    if n == 3:
        st = math.sin(p[0])
        return np.array([st * math.cos(p[1]), st * math.sin(p[1]), math.cos(p[0])])
    return np.array([math.sin(p[0]), 0.0, 0.0, math.cos(p[0])])


def _point_to_polar(n: int, w) -> np.ndarray:
    if n == 2:
        return np.array([math.atan2(w[1], w[0])])
    if n == 3:
        return np.array([math.acos(np.clip(w[2], -1, 1)), math.atan2(w[1], w[0])])
    return np.array([math.acos(np.clip(w[3], -1, 1))])


def sup_over_sphere(fs: FieldSampler, t: float, r, *, degree: int | None = None, refine: int = 3) -> np.ndarray:
    """``sup_w |u(t, r w)|`` for each radius in ``r``.

    Grid maximum on a tensor grid of degree ``4 L + 16`` (zonal data use a
    meridian), polished by Nelder-Mead from the ``refine`` best radii.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    modes = fs.modes
    if len(modes) == 0:
        return np.zeros(r.size)
    n = modes.n
    sgrid = _grid_for(modes, degree or angular_degree(modes.l_max, np.inf))
    factors = sgrid.factors(modes.indices)
    c = fs.mode_coefficients([t], r)[:, 0, :]
    A, B = factors
    best = np.zeros(r.size)
    arg = np.zeros(r.size, dtype=int)
    for sl in _chunks(r.size, sgrid.size):
        mag = np.abs(np.einsum("mr,mj,mk->rjk", c[:, sl], A, B, optimize=True)).reshape(sl.stop - sl.start, -1)
        best[sl] = mag.max(axis=1)
        arg[sl] = mag.argmax(axis=1)
    if refine and r.size:
        pts = sgrid.points().reshape(-1, n)
        for j in np.argsort(best)[::-1][:refine]:
            cj = c[:, j]

            def neg(p, cj=cj):
                w = _polar_to_point(n, p)
                vals = np.array([eval_basis(h, w) for h in modes.indices])
                return -abs(cj @ vals)

            res = minimize(neg, _point_to_polar(n, pts[arg[j]]), method="Nelder-Mead",
                           options={"xatol": 1e-8, "fatol": 1e-14, "maxiter": 300})
            best[j] = max(best[j], -float(res.fun))
    return best


def sup_norm(fs: FieldSampler, t: float, *, dr: float = 1 / 16, window: float = WINDOW, refine: int = 3) -> float:
    """``||u(t)||_{L^inf(R^n)}``: radial grid of step ``dr`` over the shell, then local polishing."""
    lo, hi = shell_window(t, fs.modes.l_max, window)
    r = np.arange(lo, hi + dr / 2, dr)
    vals = sup_over_sphere(fs, t, r, refine=0)
    best = float(vals.max()) if vals.size else 0.0
    if refine and vals.size:
        # golden-section style refinement in r around the best grid radii
        for j in np.argsort(vals)[::-1][:refine]:
            fine = np.linspace(max(0.0, r[j] - dr), r[j] + dr, 9)
            best = max(best, float(sup_over_sphere(fs, t, fine, refine=1).max()))
    return best


# ---------------------------------------------------------------------------
# dual-scale norms
# ---------------------------------------------------------------------------


def cube_masses(fs: FieldSampler, t: float, mus, *, samples_per_side: float = 2.0, per_unit: int = 12,
                window: float = WINDOW) -> dict:
    """Squared ``L^2`` mass of ``u(t)`` in each cube ``prod [a_i/mu, (a_i+1)/mu)``.

    Polar quadrature nodes are assigned to the cube containing them; the
    angular resolution grows with the radius so that every cube of side
    ``1/max(mus)`` receives about ``samples_per_side`` nodes per side.
    Returns ``{mu: masses}`` (masses in arbitrary cube order).
    """
    modes = fs.modes
    n = modes.n
    if n not in (2, 3):
        raise ValueError("cube partitions are available for n = 2 and n = 3")
    mus = [float(m) for m in np.atleast_1d(mus)]
    if any(not 0 < m <= 1 for m in mus):
        raise ValueError("mu must lie in (0, 1]")
    if len(modes) == 0:
        return {m: np.zeros(0) for m in mus}
    L = modes.l_max
    mu_top = max(mus)
    lo, hi = shell_window(t, L, window)
    panels = max(1, math.ceil(hi - lo))
    edges = np.linspace(lo, hi, panels + 1)
    # dense per-cube accumulators indexed by the shifted integer cell
    half = {m: int(math.ceil(hi * m)) + 1 for m in mus}
    acc = {m: np.zeros((2 * half[m]) ** n) for m in mus}
    base = 2 * L + 16
    for p in range(panels):
        rule = composite_gauss_legendre(edges[p], edges[p + 1], 1, order=per_unit)
        need = int(math.ceil(2 * math.pi * edges[p + 1] * mu_top * samples_per_side))
        sgrid = sphere_grid(n, max(base, need))
        A, B = sgrid.factors(modes.indices)
        pts = sgrid.points()
        c = fs.mode_coefficients([t], rule.nodes)[:, 0, :]
        vals = np.abs(np.einsum("mr,mj,mk->rjk", c, A, B, optimize=True)) ** 2
        mass = (vals * (rule.weights * rule.nodes ** (n - 1))[:, None, None] * sgrid.weights[None]).ravel()
        X = (rule.nodes[:, None, None, None] * pts[None]).reshape(-1, n)
        for m in mus:
            h = half[m]
            cells = np.floor(X * m).astype(np.int64) + h
            key = np.ravel_multi_index(tuple(cells.T), (2 * h,) * n)
            acc[m] += np.bincount(key, weights=mass, minlength=acc[m].size)
    return {m: acc[m][acc[m] > 0] for m in mus}


def dual_scale_norm(fs: FieldSampler, t: float, mu: float, p: float, **kwargs) -> float:
    """``(sum_a ||u(t)||^p_{L^2(Q_a)})^{1/p}`` over cubes of side ``1/mu``; ``p = inf`` takes the max."""
    if not 0 < mu <= 1:
        raise ValueError("mu must lie in (0, 1]")
    masses = cube_masses(fs, t, [mu], **kwargs)[float(mu)]
    norms = np.sqrt(masses)
    if norms.size == 0:
        return 0.0
    if np.isinf(p):
        return float(norms.max())
    return float(np.sum(norms**p) ** (1 / p))


# ---------------------------------------------------------------------------
# axisymmetric Cartesian evaluator
# ---------------------------------------------------------------------------


class AxisymmetricField:
    """Cartesian evaluation of zonal unit-frequency data in a frame moving with the wave.

    For zonal data ``f^(xi) = F(xi_1, eta)`` with ``xi_1`` along the pole
    and ``eta = |xi_perp|``, the solution ``e^{sign i t sqrt(-Delta)} f`` at
    ``x_1 = -sign * t + y`` and ``|x_perp| = s`` is

        ``int int F(xi_1, eta) e^{2 pi i (y xi_1 + t (xi_1 - |xi|))} K(s eta) eta^{n-2} d eta d xi_1``

    (for ``sign = -1``), with ``K`` the Fourier transform of the measure on
    ``S^{n-2}``: ``2 pi J_0`` for ``n = 3`` and ``4 pi sinc`` for ``n = 4``.
    The double integral factorises into three matrix products.

    ``alpha_max`` bounds the polar angle of the frequency support; it must
    cover the angular profile of the data.  ``t_max`` is the latest time
    that will be evaluated and enters the frequency-side node counts.
    """

    def __init__(self, modes: ModeSet, alpha_max: float, *, sign: int = -1, y_half: float = 8.0,
                 s_max: float | None = None, t_max: float = 0.0, nodes_per_cycle: int = 8):
        if modes.n not in (3, 4) or not modes.is_zonal:
            raise ValueError("axisymmetric evaluation needs zonal data in dimension 3 or 4")
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.modes = modes
        self.n = modes.n
        self.sign = sign
        self.alpha_max = min(float(alpha_max), math.pi / 2)
        self.y_half = float(y_half)
        a, b = SUPPORT
        eta_top = b * math.sin(self.alpha_max)
        self.s_max = float(s_max) if s_max is not None else 8.0 / math.sin(self.alpha_max)
        self.nodes_per_cycle = nodes_per_cycle
        xi_lo = a * math.cos(self.alpha_max)
        # the largest phase gradients set the node counts in xi_1 and eta
        slope_xi = 2 * self.y_half + abs(t_max) * (1 - math.cos(self.alpha_max)) + 4
        slope_eta = self.s_max + abs(t_max) * math.sin(self.alpha_max) + 4
        self._xi = composite_gauss_legendre(xi_lo, b, max(4, math.ceil(slope_xi * (b - xi_lo) * nodes_per_cycle / 32)), 32)
        self._eta = composite_gauss_legendre(0.0, eta_top, max(4, math.ceil(slope_eta * eta_top * nodes_per_cycle / 32)), 32)
        xi1, eta = np.meshgrid(self._xi.nodes, self._eta.nodes, indexing="ij")
        rho = np.hypot(xi1, eta)
        cos_a = xi1 / rho
        L = modes.l_max
        Y = zonal_profile_matrix(self.n, L, cos_a.ravel())
        prof = np.zeros((L + 1, rho.size), dtype=complex)
        for idx, p in modes.profiles.items():
            prof[idx.l] = p(rho.ravel())
        self._rho = rho
        self._F = np.einsum("lp,lp->p", prof, Y).reshape(rho.shape)
        self._lost = self._captured_energy()

    def _captured_energy(self) -> float:
        dens = np.abs(self._F) ** 2 * (self._eta.nodes ** (self.n - 2))[None, :]
        inner = float(self._xi.weights @ dens @ self._eta.weights) * sphere_area(self.n - 1)
        total = self.modes.energy()
        return max(0.0, 1 - inner / total) if total > 0 else 0.0

    @property
    def frequency_truncation(self) -> float:
        """Share of ``||f||^2`` outside the polar cap ``alpha <= alpha_max``."""
        return self._lost

    def _kernel(self, s: np.ndarray) -> np.ndarray:
        z = 2 * np.pi * np.outer(self._eta.nodes, s)
        if self.n == 3:
            return 2 * np.pi * j0(z)
        return 4 * np.pi * np.sinc(z / np.pi)

    def grid(self, y_per_unit: int = 8, s_per_unit: int | None = None):
        """Quadrature rules in ``y`` and ``s = |x_perp|`` covering the evaluation box."""
        ry = composite_gauss_legendre(-self.y_half, self.y_half, max(1, math.ceil(2 * self.y_half * y_per_unit / 16)), 16)
        eta_top = self._eta.nodes[-1]
        if s_per_unit is None:
            s_per_unit = max(2.0, 2 * eta_top * self.nodes_per_cycle)
        rs = composite_gauss_legendre(0.0, self.s_max, max(1, math.ceil(self.s_max * s_per_unit / 16)), 16)
        return ry, rs

    def field(self, t: float, y, s) -> np.ndarray:
        """``u`` at ``x_1 = -sign t + y`` and ``|x_perp| = s``; shape ``(len(y), len(s))``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = np.atleast_1d(np.asarray(s, dtype=float))
        xi1 = self._xi.nodes
        # phase e^{2 pi i (x_1 xi_1 + sign t |xi|)} with x_1 = -sign t + y
        G = self._F * np.exp(2j * np.pi * self.sign * t * (self._rho - xi1[:, None]))
        G = G * (self._xi.weights[:, None] * (self._eta.weights * self._eta.nodes ** (self.n - 2))[None, :])
        E = np.exp(2j * np.pi * np.outer(y, xi1))
        return E @ G @ self._kernel(s)

    def lr_norm(self, t: float, power: float, *, y_per_unit: int = 8, s_per_unit: int | None = None) -> float:
        """``||u(t)||_{L^p}`` over the box ``|y| <= y_half``, ``|x_perp| <= s_max``."""
        ry, rs = self.grid(y_per_unit, s_per_unit)
        mag = np.abs(self.field(t, ry.nodes, rs.nodes))
        vol = sphere_area(self.n - 1) * rs.weights * rs.nodes ** (self.n - 2)
        if np.isinf(power):
            return float(mag.max())
        return float(ry.weights @ (mag**power) @ vol) ** (1 / power)
