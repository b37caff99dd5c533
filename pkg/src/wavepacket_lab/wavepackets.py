"""Wave-packet decomposition of unit-frequency modes.

A radial profile ``c(rho)`` supported in ``(1/2, 2)`` is expanded in its
period-4 Fourier series

    ``c(rho) = sum_k c_k exp(i pi k rho / 2)``,  ``c_k = (1/4) int_0^4 c(rho) exp(-i pi k rho / 2) d rho``,

and every exponential is propagated separately.  With the smooth window
``beta`` (equal to 1 on ``[1/2, 2]``, supported in ``(1/4, 4)``) the packet
functions are

    ``psi^l_m(r) = int J_{(n-2)/2+l}(2 pi r rho) exp(-2 pi i m rho) beta(rho) rho^{n/2} d rho``

and a propagated mode is recovered as

    ``c^l_i(t, r) = 2 pi i^l r^{(2-n)/2} sum_k c_k psi^l_{t-k/4}(r)``.

The module also states and fits the three-regime pointwise bounds for
``psi^l_m``.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .harmonics import HarmonicIndex, sphere_area
from .propagator import SUPPORT, ModeSet, _kernel_table, window
from .specfun import BesselOrder, bessel_j, composite_gauss_legendre, gauss_legendre, oscillatory_integrate

__all__ = [
    "K_MAX",
    "WINDOW_SUPPORT",
    "Regime",
    "PacketCoefficients",
    "ScanGrid",
    "ConstantsTable",
    "to_packets",
    "from_packets",
    "packet_decomposition",
    "psi",
    "psi_table",
    "reconstruct_mode",
    "reconstruct_modes",
    "asymptotic_bound",
    "outer_branch",
    "fit_constants",
    "packet_energy_bounds",
]

K_MAX = 512
WINDOW_SUPPORT = (0.25, 4.0)
_PERIOD = 4.0


def _series_rule(K: int):
    # eight nodes per oscillation of the highest retained harmonic over the support
    a, b = SUPPORT
    panels = max(16, math.ceil((K / 4 + 1) * (b - a) * 8 / 32))
    return composite_gauss_legendre(a, b, panels, order=32)


# ---------------------------------------------------------------------------
# Fourier series of profiles
# ---------------------------------------------------------------------------


def to_packets(profile, K_max: int = K_MAX) -> np.ndarray:
    """Coefficients ``c_k`` for ``k = -K_max .. K_max`` (index ``k + K_max``).

    Raises
    ------
    ValueError
        if the profile does not vanish outside ``(1/2, 2)``.
    """
    probe = np.concatenate([np.linspace(0.01, SUPPORT[0], 25), np.linspace(SUPPORT[1], 3.99, 25)])
    if np.any(np.abs(profile(probe)) > 0):
        raise ValueError("profile is not supported in (1/2, 2)")
    rule = _series_rule(K_max)
    k = np.arange(-K_max, K_max + 1)
    vals = profile(rule.nodes) * rule.weights
    phase = np.exp(-0.5j * np.pi * np.outer(k, rule.nodes))
    return (phase @ vals) / _PERIOD


def from_packets(coeffs: np.ndarray, rho) -> np.ndarray:
    """Evaluate ``sum_k c_k exp(i pi k rho / 2)``."""
    coeffs = np.asarray(coeffs)
    K = (coeffs.size - 1) // 2
    k = np.arange(-K, K + 1)
    return np.exp(0.5j * np.pi * np.outer(np.atleast_1d(rho), k)) @ coeffs


@dataclass(frozen=True)
class PacketCoefficients:
    """Packet coefficients ``c^l_{i,k}`` for every mode of a :class:`ModeSet`.

    ``table`` has shape ``(modes, 2 K_max + 1)``; column ``j`` is ``k = j - K_max``.
    """

    n: int
    indices: tuple
    table: np.ndarray
    K_max: int = K_MAX
    N: int | None = None

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.K_max, self.K_max + 1)

    def energy(self) -> float:
        """``sum |c^l_{i,k}|^2``."""
        return float(np.sum(np.abs(self.table) ** 2))

    def tail_fraction(self, K: int) -> float:
        """Share of ``sum |c|^2`` carried by ``|k| > K``."""
        total = self.energy()
        if total == 0:
            return 0.0
        outside = np.abs(self.ks) > K
        return float(np.sum(np.abs(self.table[:, outside]) ** 2) / total)

    def significant_ks(self, rtol: float = 1e-15) -> np.ndarray:
        """Smallest symmetric ``k`` range holding every coefficient above ``rtol * max``."""
        mags = np.max(np.abs(self.table), axis=0) if self.table.size else np.zeros(self.ks.size)
        top = mags.max() if mags.size else 0.0
        if top == 0:
            return np.zeros(0, dtype=int)
        keep = np.nonzero(mags > rtol * top)[0]
        K = int(np.max(np.abs(self.ks[keep])))
        return np.arange(-K, K + 1)

    def row(self, idx: HarmonicIndex) -> np.ndarray:
        return self.table[self.indices.index(idx)]


def packet_decomposition(modes: ModeSet, K_max: int = K_MAX) -> PacketCoefficients:
    """Fourier-series coefficients of every profile in ``modes``."""
    rule = _series_rule(K_max)
    k = np.arange(-K_max, K_max + 1)
    vals = modes.profile_matrix(rule.nodes) * rule.weights[None, :]
    phase = np.exp(-0.5j * np.pi * np.outer(rule.nodes, k))
    table = vals @ phase / _PERIOD if len(modes) else np.zeros((0, k.size), dtype=complex)
    return PacketCoefficients(modes.n, tuple(modes.indices), table, K_max, modes.N)


# ---------------------------------------------------------------------------
# packet functions
# ---------------------------------------------------------------------------


def psi(l: int, m: float, r: float, n: int, *, rtol: float = 1e-11) -> complex:
    """``psi^l_m(r)`` by adaptive oscillatory quadrature."""
    if r < 0:
        raise ValueError("r must be non-negative")
    s = BesselOrder.for_mode(n, l)

    def amp(rho):
        return bessel_j(s, 2 * np.pi * r * rho) * window(rho) * rho ** (n / 2)

    return oscillatory_integrate(amp, -m, gauss_legendre(32, *WINDOW_SUPPORT), bandwidth=r, rtol=rtol)


def _window_rule(frequency: float):
    a, b = WINDOW_SUPPORT
    panels = max(16, math.ceil((abs(frequency) + 1) * (b - a) * 8 / 32))
    return composite_gauss_legendre(a, b, panels, order=32)


def psi_table(n: int, ls: Sequence[int], ms, rs, *, scaled: bool = False, max_block: int = 2 * 10**7) -> np.ndarray:
    """``psi^l_m(r)`` for all ``l in ls``, ``m in ms``, ``r in rs``.

    Returns shape ``(len(ls), len(ms), len(rs))``.  With ``scaled=True`` the
    factor ``r^{(2-n)/2}`` is included, which keeps the ``r = 0`` column finite.
    """
    ls = [int(l) for l in ls]
    ms = np.atleast_1d(np.asarray(ms, dtype=float))
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    if np.any(rs < 0):
        raise ValueError("radii must be non-negative")
    rule = _window_rule(np.max(np.abs(ms)) + np.max(rs) + 1.0)
    rho = rule.nodes
    amp = window(rho) * rho ** (n / 2) * rule.weights
    E = amp[:, None] * np.exp(-2j * np.pi * np.outer(rho, ms))
    Er, Ei = np.ascontiguousarray(E.real), np.ascontiguousarray(E.imag)
    out = np.empty((len(ls), ms.size, rs.size), dtype=complex)
    chunk = max(1, max_block // ((max(ls) + 3) * rho.size))
    for a in range(0, rs.size, chunk):
        rr = rs[a:a + chunk]
        kern = _kernel_table(n, ls, rr, rho)
        if not scaled:
            pos = rr > 0
            undo = np.where(pos, rr, 1.0) ** ((n - 2) / 2)
            kern = kern * undo[None, :, None]
            if not np.all(pos):
                # unscaled kernel at r = 0 is J_s(0): 1 for s = 0, else 0
                for row, l in enumerate(ls):
                    kern[row, ~pos] = 1.0 if (n - 2 + 2 * l) == 0 else 0.0
        for row in range(len(ls)):
            out[row, :, a:a + chunk] = (kern[row] @ Er + 1j * (kern[row] @ Ei)).T
    return out


def reconstruct_modes(coeffs: PacketCoefficients, t, r, *, rtol: float = 1e-15) -> np.ndarray:
    """Packet-sum evaluation of ``c^l_i(t, r)`` for every mode; shape ``(modes, len(t), len(r))``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros((len(coeffs.indices), t.size, r.size), dtype=complex)
    ks = coeffs.significant_ks(rtol)
    if ks.size == 0:
        return out
    cols = ks + coeffs.K_max
    by_l: dict[int, list[int]] = {}
    for j, idx in enumerate(coeffs.indices):
        by_l.setdefault(idx.l, []).append(j)
    ms = (t[:, None] - ks[None, :] / 4.0).ravel()
    ls = sorted(by_l)
    table = psi_table(coeffs.n, ls, ms, r, scaled=True).reshape(len(ls), t.size, ks.size, r.size)
    for row, l in enumerate(ls):
        rows = by_l[l]
        c = coeffs.table[np.ix_(rows, cols)]
        out[rows] = 2 * np.pi * (1j) ** l * np.einsum("jk,tkr->jtr", c, table[row])
    return out


def reconstruct_mode(coeffs: PacketCoefficients, idx: HarmonicIndex, t: float, r: float) -> complex:
    """``2 pi i^l r^{(2-n)/2} sum_k c^l_{i,k} psi^l_{t-k/4}(r)`` for one mode."""
    j = coeffs.indices.index(idx)
    single = PacketCoefficients(coeffs.n, (idx,), coeffs.table[j:j + 1], coeffs.K_max)
    return complex(reconstruct_modes(single, [t], [r])[0, 0, 0])


# ---------------------------------------------------------------------------
# three-regime bounds
# ---------------------------------------------------------------------------


class Regime(enum.IntEnum):
    INNER = 1   # r < 1
    MIDDLE = 2  # 1 <= r <= |m| + 1
    OUTER = 3   # r > |m| + 1


def _regimes(m, r):
    am = np.abs(m)
    return np.where(r < 1, 1, np.where(r <= am + 1, 2, 3))


def outer_branch(l: float, m: float, r: float) -> str:
    """Which power realises ``min_pm (l / sqrt(r^2 - m^2))^{pm N2}`` (``'+'`` when the ratio is below 1)."""
    if r <= abs(m) + 1:
        raise ValueError("only defined in the outer regime")
    x = l / math.sqrt(r * r - m * m)
    return "+" if x <= 1 else "-"


def _bound_values(l, m, r, n, N1, N2):
    """Unit-constant right-hand sides and regimes, broadcast over inputs."""
    l, m, r = np.broadcast_arrays(np.asarray(l, float), np.asarray(m, float), np.asarray(r, float))
    am = np.abs(m)
    reg = _regimes(m, r)
    gap = 1 + np.abs(am - r)
    with np.errstate(divide="ignore", invalid="ignore"):
        b1 = r ** ((n - 2) / 2) * (1 + am) ** (-N1) * (1 + l) ** (-N2)
        b2 = (1 + r + am) ** -0.5 * gap ** (-N1) * (np.sqrt(r) / (1 + l)) ** N2
        root = np.sqrt(np.where(reg == 3, r * r - m * m, 1.0))
        x = l / root
        mn = np.where(x > 0, np.minimum(x, 1 / np.where(x > 0, x, 1.0)), 0.0) ** N2
        b3 = (gap ** (-N1) + mn) / root
    return np.where(reg == 1, b1, np.where(reg == 2, b2, b3)), reg


def asymptotic_bound(l: int, m: float, r: float, n: int, N1: float, N2: float,
                     constants: "ConstantsTable | Mapping | None" = None) -> tuple[float, Regime]:
    """Right-hand side of the pointwise bound on ``|psi^l_m(r)|`` and its regime.

    * ``r < 1``: ``C r^{(n-2)/2} (1+|m|)^{-N1} (1+l)^{-N2}``
    * ``1 <= r <= |m|+1``: ``C (1+r+|m|)^{-1/2} (1+|r-|m||)^{-N1} (r^{1/2}/(1+l))^{N2}``
    * ``r > |m|+1``: ``(r^2-m^2)^{-1/2} R`` with
      ``R = C [(1+||m|-r|)^{-N1} + min_pm (l/sqrt(r^2-m^2))^{pm N2}]``

    ``constants`` maps a :class:`Regime` to ``C`` (default 1).
    """
    if r < 0 or l < 0:
        raise ValueError("need r >= 0 and l >= 0")
    if not (0 <= N1 <= 4 and 0 <= N2 <= 4):
        raise ValueError("N1 and N2 must lie in [0, 4]")
    val, reg = _bound_values(l, m, r, n, N1, N2)
    regime = Regime(int(reg))
    C = 1.0
    if constants is not None:
        C = constants[regime] if not isinstance(constants, ConstantsTable) else constants.C[regime]
    return float(C * val), regime


@dataclass(frozen=True)
class ScanGrid:
    """Scan points for constant fitting.

    ``ms`` are non-negative; the bound depends on ``|m|`` and
    ``psi^l_{-m} = conj(psi^l_m)``, so negative translates add nothing.
    Seam points are added near ``r = |m| +- 1`` and ``r = l``.
    """

    ls: tuple = (0, 1, 4, 16, 64)
    m_max: float = 64.0
    r_max: float = 128.0
    dm: float = 0.25
    dr: float = 0.125
    seams: bool = True

    def refined(self, factor: int = 2) -> "ScanGrid":
        return ScanGrid(self.ls, self.m_max, self.r_max, self.dm / factor, self.dr / factor, self.seams)

    def extended(self, m_max: float) -> "ScanGrid":
        return ScanGrid(self.ls, m_max, self.r_max, self.dm, self.dr, self.seams)

    @property
    def ms(self) -> np.ndarray:
        return np.arange(0.0, self.m_max + self.dm / 2, self.dm)

    def rs(self) -> np.ndarray:
        r = np.arange(0.0, self.r_max + self.dr / 2, self.dr)
        if self.seams:
            # logarithmic clusters around the regime seams and the turning radius r ~ l
            offs = np.concatenate([-np.logspace(-3, 0, 8), np.logspace(-3, 0, 8)])
            centres = np.concatenate([self.ms + 1, np.abs(self.ms - 1), np.array(self.ls, float), [1.0]])
            extra = (centres[:, None] + offs[None, :]).ravel()
            r = np.concatenate([r, extra[(extra >= 0) & (extra <= self.r_max)]])
        return np.unique(r)

    def digest(self) -> str:
        payload = json.dumps([list(self.ls), self.m_max, self.r_max, self.dm, self.dr, self.seams])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ConstantsTable:
    """Fitted constants ``C`` per regime for one ``(n, N1, N2)``."""

    n: int
    N1: float
    N2: float
    C: Mapping[Regime, float]
    grid_hash: str
    argmax: Mapping[Regime, tuple] = field(default_factory=dict)

    def rows(self):
        return [(self.n, self.N1, self.N2, int(reg), self.C[reg], self.grid_hash) for reg in Regime]

    def to_csv(self, path, append: bool = False) -> None:
        new = not append
        with open(path, "a" if append else "w", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(["n", "N1", "N2", "regime", "C", "grid_hash"])
            for row in self.rows():
                w.writerow([row[0], repr(float(row[1])), repr(float(row[2])), row[3], repr(float(row[4])), row[5]])

    @classmethod
    def read_csv(cls, path) -> list["ConstantsTable"]:
        groups: dict = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                key = (int(row["n"]), float(row["N1"]), float(row["N2"]), row["grid_hash"])
                groups.setdefault(key, {})[Regime(int(row["regime"]))] = float(row["C"])
        return [cls(n, a, b, C, h) for (n, a, b, h), C in groups.items()]


def fit_constants(n: int, N1: float, N2: float, grid: ScanGrid | None = None, *,
                  psi_values: np.ndarray | None = None) -> ConstantsTable:
    """Smallest ``C`` per regime with ``|psi| <= C * bound`` on the scan grid.

    ``r = 0`` is skipped (both sides vanish or the bound is zero).
    ``psi_values`` (shape ``(len(ls), len(ms), len(rs))``) may be passed to
    reuse one table for several ``(N1, N2)``.
    """
    grid = grid or ScanGrid()
    ms, rs = grid.ms, grid.rs()
    if psi_values is None:
        psi_values = psi_table(n, grid.ls, ms, rs)
    mag = np.abs(psi_values)
    best = {reg: 0.0 for reg in Regime}
    where: dict = {reg: () for reg in Regime}
    pos = rs > 0
    for row, l in enumerate(grid.ls):
        bound, reg = _bound_values(l, ms[:, None], rs[None, pos], n, N1, N2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(bound > 0, mag[row][:, pos] / bound, np.where(mag[row][:, pos] > 0, np.inf, 0.0))
        for r_ in Regime:
            sel = reg == int(r_)
            if np.any(sel):
                vals = np.where(sel, ratio, -1.0)
                k = np.unravel_index(np.argmax(vals), vals.shape)
                if vals[k] > best[r_]:
                    best[r_] = float(vals[k])
                    where[r_] = (l, float(ms[k[0]]), float(rs[pos][k[1]]))
    return ConstantsTable(n, N1, N2, best, grid.digest(), where)


def packet_energy_bounds(n: int) -> tuple[float, float]:
    """Constants ``(a, b)`` with ``a ||f||^2 <= sum |c^l_{i,k}|^2 <= b ||f||^2`` for unit-frequency data.

    Parseval on ``(0, 4)`` gives ``4 sum_k |c_k|^2 = int |c(rho)|^2 d rho``;
    comparing ``rho^{n-1}`` with its extreme values on ``(1/2, 2)`` yields the constants.
    """
    area = sphere_area(n)
    lo, hi = SUPPORT[0] ** (n - 1), SUPPORT[1] ** (n - 1)
    return 1.0 / (4 * area * hi), 1.0 / (4 * area * lo)

