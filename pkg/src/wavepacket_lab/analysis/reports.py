"""Estimate reports: scan rows, slope fits and verdicts."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = ["PASS", "FAIL", "INCONCLUSIVE", "NA", "SlopeFit", "EstimateReport", "fit_slope", "fit_bilinear", "combine_verdicts"]

PASS, FAIL, INCONCLUSIVE, NA = "PASS", "FAIL", "INCONCLUSIVE", "N/A"

#: Fits with a coefficient of determination below this are not trusted.
MIN_R2 = 0.9


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit ``log y = sum_j slope_j log x_j + intercept``."""

    slopes: tuple
    intercept: float
    r2: float
    residual: float

    @property
    def slope(self) -> float:
        return self.slopes[0]


def _lstsq(design: np.ndarray, y: np.ndarray) -> SlopeFit:
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    pred = design @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    # a perfectly flat response is fitted exactly by the intercept alone
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res < 1e-24 else 0.0)
    return SlopeFit(tuple(float(c) for c in coef[:-1]), float(coef[-1]), r2, math.sqrt(ss_res / max(len(y), 1)))


def fit_slope(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Log-log regression of ``y`` against ``x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("need at least two positive points")
    return _lstsq(np.stack([np.log(x), np.ones_like(x)], axis=1), np.log(y))


def fit_bilinear(x1: Sequence[float], x2: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Fit ``log y = a log x1 + b log x2 + c``; ``slopes = (a, b)``."""
    x1, x2, y = (np.asarray(v, float) for v in (x1, x2, y))
    if x1.size < 3 or np.any(x1 <= 0) or np.any(x2 <= 0) or np.any(y <= 0):
        raise ValueError("need at least three positive points")
    return _lstsq(np.stack([np.log(x1), np.log(x2), np.ones_like(x1)], axis=1), np.log(y))


def combine_verdicts(verdicts: Sequence[str]) -> str:
    verdicts = [v for v in verdicts if v != NA]
    if not verdicts:
        return NA
    if FAIL in verdicts:
        return FAIL
    if INCONCLUSIVE in verdicts:
        return INCONCLUSIVE
    return PASS


@dataclass
class EstimateReport:
    """Scan results for one estimate.

    ``rows`` are dictionaries with identical keys, one per scan point.
    ``summary`` holds fitted slopes, constants, tolerances and the verdict.
    """

    name: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    seeds: tuple = ()
    grid: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return self.summary.get("verdict", NA)

    def add(self, **row) -> None:
        self.rows.append(row)

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows])

    def grid_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.grid, sort_keys=True, default=str).encode()).hexdigest()[:16]

    def record(self) -> dict:
        return {
            "name": self.name,
            **{k: _plain(v) for k, v in self.summary.items()},
            "seeds": list(self.seeds),
            "grid_hash": self.grid_hash(),
        }

    def to_csv(self, path) -> None:
        keys = list(self.rows[0]) if self.rows else []
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(keys)
            for row in self.rows:
                w.writerow([_fmt(row[k]) for k in keys])

    def to_json(self, path, **extra) -> None:
        with open(path, "w") as fh:
            json.dump({**self.record(), **extra}, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
