"""Bessel and Gegenbauer functions plus the quadrature engines used by the lab.

Bessel orders are restricted to half-integers ``s = k/2`` with ``k >= -1``,
which covers every order ``(n - 2)/2 + l`` met in dimensions 2, 3 and 4.

Two evaluation paths are provided:

* :func:`bessel_j` evaluates a single order (power series for small
  arguments, Miller recurrence otherwise);
* :func:`bessel_j_orders` evaluates a whole ladder ``s0, s0 + 1, ...`` at
  once on an array of arguments.  This is the bulk path used by the
  propagator, where every harmonic degree is needed at the same arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln, j0, j1, roots_legendre

__all__ = [
    "BesselOrder",
    "QuadratureRule",
    "QuadratureNotConverged",
    "gauss_legendre",
    "composite_gauss_legendre",
    "bessel_j",
    "bessel_j_orders",
    "bessel_j_series",
    "bessel_j_interval_integral",
    "bessel_j_halfint_integral",
    "bessel_j_asymptotic",
    "check_bessel_recursion",
    "gegenbauer",
    "oscillatory_integrate",
]


class QuadratureNotConverged(RuntimeError):
    """Raised when node doubling fails to stabilise a quadrature."""


@dataclass(frozen=True)
class BesselOrder:
    """A half-integer Bessel order ``s = twice_order / 2``."""

    twice_order: int

    def __post_init__(self):
        if int(self.twice_order) != self.twice_order:
            raise TypeError("twice_order must be an integer")
        if self.twice_order < -1:
            raise ValueError(f"Bessel order {self.twice_order}/2 is below -1/2")

    @property
    def s(self) -> float:
        return self.twice_order / 2.0

    @property
    def is_integer(self) -> bool:
        return self.twice_order % 2 == 0

    @classmethod
    def of(cls, s: float | "BesselOrder") -> "BesselOrder":
        if isinstance(s, BesselOrder):
            return s
        k = round(2 * s)
        if abs(2 * s - k) > 1e-12:
            raise ValueError(f"order {s} is not a half-integer")
        return cls(int(k))

    @classmethod
    def for_mode(cls, n: int, l: int) -> "BesselOrder":
        """Order ``(n - 2)/2 + l`` of the Hankel kernel for degree ``l``."""
        return cls(n - 2 + 2 * l)


# ---------------------------------------------------------------------------
# quadrature rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a quadrature rule on ``interval``."""

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]

    def __post_init__(self):
        a, b = self.interval
        if not b > a:
            raise ValueError("empty interval")
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights differ in shape")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if self.nodes.size and (self.nodes[0] <= a or self.nodes[-1] >= b):
            raise ValueError("nodes must lie inside the open interval")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    def __len__(self):
        return self.nodes.size

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]):
        return np.dot(self.weights, f(self.nodes))

    def reference(self) -> tuple[np.ndarray, np.ndarray]:
        """The rule pulled back to ``[-1, 1]``."""
        a, b = self.interval
        half = 0.5 * (b - a)
        return (self.nodes - 0.5 * (a + b)) / half, self.weights / half


def gauss_legendre(order: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    x, w = roots_legendre(order)
    half = 0.5 * (b - a)
    return QuadratureRule(0.5 * (a + b) + half * x, half * w, (a, b))


def composite_gauss_legendre(
    a: float, b: float, panels: int, order: int = 32, base: QuadratureRule | None = None
) -> QuadratureRule:
    """Composite rule: ``panels`` equal panels carrying copies of ``base``.

    ``base`` defaults to ``order``-point Gauss-Legendre.
    """
    if panels < 1:
        raise ValueError("need at least one panel")
    if base is None:
        x, w = roots_legendre(order)
    else:
        x, w = base.reference()
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return QuadratureRule(nodes, weights, (a, b))


def _panels_for(frequency: float, length: float, nodes_per_panel: int, per_oscillation: int = 8) -> int:
    return max(1, math.ceil(abs(frequency) * length * per_oscillation / nodes_per_panel))


def oscillatory_integrate(
    amplitude: Callable[[np.ndarray], np.ndarray],
    frequency: float,
    rule: QuadratureRule,
    *,
    bandwidth: float = 0.0,
    rtol: float = 1e-10,
    max_depth: int = 10,
) -> complex:
    """Integrate ``amplitude(x) * exp(2 pi i frequency x)`` over ``rule.interval``.

    The interval is cut into copies of ``rule`` so that there are at least
    eight nodes per oscillation of ``|frequency| + bandwidth`` (``bandwidth``
    accounts for oscillation carried by the amplitude itself).  The panel
    count is then doubled until two successive results agree to ``rtol``
    relative to ``max(|I|, integral of |amplitude * phase|)``.

    Raises
    ------
    QuadratureNotConverged
        if ``max_depth`` doublings do not stabilise the result.
    """
    a, b = rule.interval
    x_ref, w_ref = rule.reference()
    base = QuadratureRule(x_ref, w_ref, (-1.0, 1.0))
    panels = _panels_for(abs(frequency) + abs(bandwidth), b - a, len(rule))

    def run(p):
        q = composite_gauss_legendre(a, b, p, base=base)
        vals = amplitude(q.nodes) * np.exp(2j * np.pi * frequency * q.nodes)
        return complex(np.dot(q.weights, vals)), float(np.dot(q.weights, np.abs(vals)))

    previous, _ = run(panels)
    for _ in range(max_depth):
        panels *= 2
        current, scale = run(panels)
        if abs(current - previous) <= rtol * max(abs(current), scale, 1e-300):
            return current
        previous = current
    raise QuadratureNotConverged(
        f"oscillatory quadrature did not stabilise after {max_depth} doublings "
        f"(last change {abs(current - previous):.3e})"
    )


# ---------------------------------------------------------------------------
# Bessel functions
# ---------------------------------------------------------------------------


def _check_args(s: float, y):
    if s < -0.5:
        raise ValueError(f"Bessel order {s} is below -1/2")
    y = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(y)):
        raise ValueError("Bessel argument must be finite")
    if np.any(y < 0):
        raise ValueError("Bessel argument must be non-negative")
    return y


def bessel_j_series(s: float, y, terms: int | None = None):
    """Power series ``sum_k (-1)^k (y/2)^(s+2k) / (k! Gamma(s+k+1))``.

    Accurate where ``(y/2)^2`` is at most a modest multiple of ``s + 1``;
    for larger arguments the alternating terms cancel.
    """
    y = _check_args(s, y)
    half = 0.5 * y
    q = -(half * half)
    if terms is None:
        ymax = float(np.max(y)) if y.size else 0.0
        terms = int(12 + 2 * ymax + 0.5 * ymax * ymax / (s + 1.0))
        terms = min(terms, 400)
    with np.errstate(divide="ignore"):
        lead = np.where(
            y > 0, np.exp(s * np.log(np.where(y > 0, half, 1.0)) - gammaln(s + 1.0)), 0.0
        )
    if s == 0:
        lead = np.where(y == 0, 1.0, lead)
    term = np.ones_like(y)
    total = np.ones_like(y)
    for k in range(1, terms):
        term = term * q / (k * (k + s))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return lead * total


def _use_series(s: float, y: np.ndarray) -> np.ndarray:
    return (y <= 2.0) | (0.25 * y * y <= s + 1.0)


def bessel_j(order, y):
    """Bessel function ``J_s(y)`` for half-integer ``s >= -1/2`` and ``y >= 0``.

    Uses the power series where it does not cancel and a Miller backward
    recurrence (normalised against closed forms of the lowest orders)
    everywhere else.  Accepts a :class:`BesselOrder` or a float order;
    ``y`` may be a scalar or an array.
    """
    order = BesselOrder.of(order)
    s = order.s
    y_arr = _check_args(s, y)
    scalar = y_arr.ndim == 0
    y1 = np.atleast_1d(y_arr)
    out = np.empty_like(y1)
    small = _use_series(s, y1)
    if np.any(small):
        out[small] = bessel_j_series(s, y1[small])
    if np.any(~small):
        base = BesselOrder(order.twice_order % 2 if order.twice_order >= 0 else -1)
        steps = int(round(s - base.s))
        out[~small] = bessel_j_orders(base, steps + 1, y1[~small])[-1]
    return float(out[0]) if scalar else out.reshape(y_arr.shape)


def _low_orders(base: BesselOrder, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``J_{s0}`` and ``J_{s0+1}`` for the base of a ladder (``y > 0``)."""
    if base.is_integer:
        if base.twice_order == 0:
            return j0(y), j1(y)
        raise ValueError("integer ladders must start at order 0")
    amp = np.sqrt(2.0 / (np.pi * y))
    sn, cs = np.sin(y), np.cos(y)
    if base.twice_order == -1:
        return amp * cs, amp * sn
    if base.twice_order == 1:
        return amp * sn, amp * (sn / y - cs)
    raise ValueError("half-integer ladders must start at order -1/2 or 1/2")


def bessel_j_orders(start, count: int, y, *, series_cutoff: float = 1e-3) -> np.ndarray:
    """``J_{s0 + k}(y)`` for ``k = 0 .. count-1``; shape ``(count,) + y.shape``.

    ``start`` is any half-integer order ``>= -1/2``.  Upward recurrence is
    used while the order is below the argument (where it is stable), and a
    Miller backward recurrence matched to the upward values at the turning
    order handles the rest.  Arguments below ``series_cutoff`` use the
    leading series terms.
    """
    start = BesselOrder.of(start)
    s0 = start.s
    y = _check_args(s0, y)
    shape = y.shape
    yf = y.ravel()
    out = np.zeros((count, yf.size))
    if count == 0 or yf.size == 0:
        return out.reshape((count,) + shape)

    tiny = yf < series_cutoff
    if np.any(tiny):
        for k in range(count):
            out[k, tiny] = bessel_j_series(s0 + k, yf[tiny], terms=6)
    idx = np.nonzero(~tiny)[0]
    if idx.size:
        out[:, idx] = _ladder(start, count, yf[idx])
    return out.reshape((count,) + shape)


def _ladder(start: BesselOrder, count: int, y: np.ndarray) -> np.ndarray:
    # the ladder always starts at the base of its family (order 0 or +-1/2)
    if start.is_integer:
        base = BesselOrder(0)
    else:
        base = BesselOrder(-1 if start.twice_order == -1 else 1)
    offset = int(round(start.s - base.s))
    total = offset + count
    sb = base.s
    res = np.empty((max(total, 2), y.size))
    a, b = _low_orders(base, y)
    res[0] = a
    res[1] = b
    # upward recurrence J_{s+1} = (2 s / y) J_s - J_{s-1}; stable while s < y
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, total - 1):
            res[k + 1] = (2.0 * (sb + k) / y) * res[k] - res[k - 1]

    bad = np.nonzero(y < sb + total - 1)[0]
    if bad.size:
        res[:, bad] = _miller(sb, max(total, 2), y[bad], a[bad], b[bad])
    return res[offset:offset + count]


def _miller(sb: float, total: int, y: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Backward recurrence for orders ``sb .. sb + total - 1``.

    The unnormalised sequence is scaled by a least-squares match to the
    exact lowest two orders ``a`` and ``b``, which avoids dividing by a
    value that happens to sit near a zero of either.
    """
    top = total - 1
    reach = max(top, float(np.max(y)))
    first = int(reach + 25 + 6 * reach ** (1.0 / 3.0))
    store = np.empty((total, y.size))
    hi = np.zeros_like(y)  # order k + 1
    cur = np.full_like(y, 1e-300)  # order k
    for k in range(first, 0, -1):
        if k <= top:
            store[k] = cur
        lower = (2.0 * (sb + k) / y) * cur - hi
        hi, cur = cur, lower
        big = np.abs(cur) > 1e100
        if np.any(big):
            hi[big] *= 1e-100
            cur[big] *= 1e-100
            if k <= top + 1:
                store[min(k, total):, big] *= 1e-100
    store[0] = cur
    norm = np.hypot(store[0], store[1])
    u0, u1 = store[0] / norm, store[1] / norm
    return store * ((a * u0 + b * u1) / norm)


def bessel_j_interval_integral(order, y, panels: int = 64) -> float:
    """``J_s`` from the finite-interval (Poisson) integral.

    ``J_s(y) = (y/2)^s / (Gamma(s + 1/2) Gamma(1/2)) * int_{-1}^{1} e^{i t y}
    (1 - t^2)^{s - 1/2} dt``, evaluated with ``t = cos(theta)`` so the endpoint
    singularity at ``s = 0`` disappears.  Valid for ``s > -1/2``; for large
    ``s`` the prefactor is huge and the integral tiny, so this is a cross
    check for moderate orders only.
    """
    s = BesselOrder.of(order).s
    if s <= -0.5:
        raise ValueError("interval integral needs s > -1/2")
    y = float(y)
    if y < 0:
        raise ValueError("Bessel argument must be non-negative")
    if y == 0:
        return 1.0 if s == 0 else 0.0
    panels = max(panels, math.ceil(y / 4.0))
    rule = composite_gauss_legendre(0.0, math.pi, panels, order=32)
    th = rule.nodes
    integral = np.dot(rule.weights, np.cos(y * np.cos(th)) * np.sin(th) ** (2 * s))
    log_pre = s * math.log(0.5 * y) - gammaln(s + 0.5) - 0.5 * math.log(math.pi)
    return float(math.exp(log_pre) * integral)


def bessel_j_halfint_integral(order, y, *, rtol: float = 1e-10, max_depth: int = 8) -> complex:
    """The doubled-interval representation ``(-i)^s/(4 pi) int_{-2pi}^{2pi} e^{i y cos th} e^{-i s th} dth``.

    Returns the full complex value so callers can inspect the imaginary
    part.  The trapezoid-free composite Gauss rule is doubled until stable.
    For integer ``s`` this reproduces ``J_s(y)``.  For odd half-integer
    ``s`` the integral vanishes identically, so it does *not* equal
    ``J_s``; callers comparing against :func:`bessel_j` will see that.
    """
    order = BesselOrder.of(order)
    s = order.s
    if s < 0:
        raise ValueError("doubled-interval form needs s >= 0")
    y = float(y)
    if y < 0:
        raise ValueError("Bessel argument must be non-negative")
    base = gauss_legendre(32)
    panels = max(4, math.ceil((y + s) * 4 * math.pi * 8 / (2 * math.pi * 32)))

    def run(p):
        q = composite_gauss_legendre(-2 * math.pi, 2 * math.pi, p, base=base)
        th = q.nodes
        return complex(np.dot(q.weights, np.exp(1j * (y * np.cos(th) - s * th))))

    prev = run(panels)
    for _ in range(max_depth):
        panels *= 2
        cur = run(panels)
        if abs(cur - prev) <= rtol * max(abs(cur), 1.0):
            break
        prev = cur
    else:
        raise QuadratureNotConverged("doubled-interval Bessel integral did not stabilise")
    return complex((-1j) ** s / (4 * math.pi) * cur)


def bessel_j_asymptotic(order, y, terms: int = 8) -> float:
    """Large-argument Hankel expansion; a cross check for ``y >> s^2``."""
    s = BesselOrder.of(order).s
    y = float(y)
    mu = 4 * s * s
    p, q = 0.0, 0.0
    a = 1.0
    for k in range(2 * terms):
        if k > 0:
            a *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * y)
        if k % 2 == 0:
            p += (-1) ** (k // 2) * a
        else:
            q += (-1) ** (k // 2) * a
    phase = y - (0.5 * s + 0.25) * math.pi
    return math.sqrt(2 / (math.pi * y)) * (p * math.cos(phase) - q * math.sin(phase))


def check_bessel_recursion(order, y_samples, step: float = 1e-5) -> float:
    """Max residual of ``d/dy [y^-s J_s(y)] = -y^-s J_{s+1}(y)`` by central differences."""
    order = BesselOrder.of(order)
    s = order.s
    ys = np.asarray(list(y_samples), dtype=float)
    if ys.size == 0:
        return 0.0
    if np.any(ys <= 0):
        raise ValueError("recursion samples must be positive")
    nxt = BesselOrder(order.twice_order + 2)

    def g(y):
        return y ** (-s) * bessel_j(order, y)

    deriv = (g(ys + step) - g(ys - step)) / (2 * step)
    rhs = -(ys ** (-s)) * bessel_j(nxt, ys)
    return float(np.max(np.abs(deriv - rhs)))


# ---------------------------------------------------------------------------
# Gegenbauer polynomials
# ---------------------------------------------------------------------------


def gegenbauer(l: int, lam: float, x):
    """``C_l^lam(x)`` by the three-term recurrence.

    ``(k + 1) C_{k+1} = 2 (k + lam) x C_k - (k + 2 lam - 1) C_{k-1}``.
    """
    if l < 0:
        raise ValueError("degree must be non-negative")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("|x| must not exceed 1")
    prev = np.ones_like(x)
    if l == 0:
        return prev if prev.ndim else float(prev)
    cur = 2.0 * lam * x
    for k in range(1, l):
        prev, cur = cur, (2.0 * (k + lam) * x * cur - (k + 2.0 * lam - 1.0) * prev) / (k + 1.0)
    return cur if cur.ndim else float(cur)
