"""Experiment configuration as a ``key = value`` text file.

Blank lines and ``#`` comments are ignored.  Sequences are comma
separated; pairs inside a sequence use ``:`` (``constants = 2:2, 3:2``).
Unknown keys are errors so that typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import os
from dataclasses import dataclass, field, fields

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "DATA_KINDS", "ESTIMATES", "OUT_ENV"]

#: Environment variable naming the default output directory.
OUT_ENV = "WAVEPACKET_LAB_OUT"

DATA_KINDS = ("random", "radial_bump", "zero", "knapp")
ESTIMATES = ("dispersive", "endpoint", "dual_scale", "threshold", "morawetz")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment run.

    ``R``, ``dr``, ``m_max`` and ``dm`` span the constant-fitting scan;
    ``T`` and ``dt`` set the time window and node spacing; ``panel`` is
    the number of Gauss nodes per unit-length radial panel in norm
    quadratures.  ``seeds`` drive calibration runs and ``holdout_seeds``
    the checks against calibrated constants.
    """

    n: int = 3
    L_max: int = 64
    K_max: int = 512
    R: float = 128.0
    dr: float = 0.125
    dm: float = 0.25
    m_max: float = 64.0
    T: float = 32.0
    dt: float = 1.0
    panel: int = 16
    eta: float = 0.125
    data: str = "random"
    N: int = 4
    eps: float = 0.25
    N_list: tuple = (2, 4, 8, 16, 32)
    mu_list: tuple = (1.0, 0.5, 0.25)
    eps_list: tuple = (0.25, 0.125, 0.0625)
    r_exponent: float = 4.5
    constants: tuple = ((2.0, 2.0), (3.0, 2.0))
    holdout_N: tuple = (8, 16)
    dual_N_list: tuple = (4, 8, 16)
    morawetz_eta: float = 0.5
    seeds: tuple = tuple(range(10))
    holdout_seeds: tuple = tuple(range(100, 120))
    estimates: tuple = ("dispersive",)
    output_dir: str = field(default_factory=lambda: os.environ.get(OUT_ENV, "wavepacket-out"))

    def __post_init__(self):
        self.validate()

    # -- validation -------------------------------------------------------
    def validate(self) -> None:
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(name, msg)

        need(self.n in (2, 3, 4), "n", "dimension must be 2, 3 or 4")
        need(0 <= self.L_max <= 256, "L_max", "must lie in [0, 256]")
        need(16 <= self.K_max <= 4096, "K_max", "must lie in [16, 4096]")
        need(self.R > 0 and math.isfinite(self.R), "R", "must be positive")
        need(0 < self.dr <= 1, "dr", "must lie in (0, 1]")
        need(0 < self.dm <= 1, "dm", "must lie in (0, 1]")
        need(0 < self.m_max <= 512, "m_max", "must lie in (0, 512]")
        need(0 < self.T <= 1024, "T", "must lie in (0, 1024]")
        need(0 < self.dt <= 4, "dt", "must lie in (0, 4]")
        need(4 <= self.panel <= 64, "panel", "must lie in [4, 64]")
        need(0 < self.eta < 1, "eta", "must lie in (0, 1)")
        need(self.data in DATA_KINDS, "data", f"must be one of {', '.join(DATA_KINDS)}")
        need(self.N >= 1 and not self.N & (self.N - 1), "N", "must be a power of two")
        need(0 < self.eps <= 0.5, "eps", "must lie in (0, 1/2]")
        need(all(N >= 1 and not N & (N - 1) for N in self.N_list), "N_list", "entries must be powers of two")
        need(all(N >= 1 and not N & (N - 1) for N in self.holdout_N), "holdout_N", "entries must be powers of two")
        need(all(N >= 1 and not N & (N - 1) for N in self.dual_N_list), "dual_N_list", "entries must be powers of two")
        need(max(self.N_list + self.holdout_N + self.dual_N_list + (self.N,)) * 2 - 1 <= self.L_max or self.data != "random",
             "L_max", "random data at the largest N needs L_max >= 2 N - 1")
        need(0 < self.morawetz_eta < 2, "morawetz_eta", "must lie in (0, 2)")
        need(all(0 < m <= 1 for m in self.mu_list), "mu_list", "entries must lie in (0, 1]")
        need(all(0 < e <= 0.5 for e in self.eps_list), "eps_list", "entries must lie in (0, 1/2]")
        need(self.r_exponent >= 2, "r_exponent", "must be at least 2")
        need(all(0 <= a <= 4 and 0 <= b <= 4 for a, b in self.constants), "constants", "N1, N2 must lie in [0, 4]")
        need(len(set(self.seeds)) == len(self.seeds), "seeds", "must be distinct")
        need(not set(self.seeds) & set(self.holdout_seeds), "holdout_seeds", "must be disjoint from seeds")
        need(all(e in ESTIMATES for e in self.estimates), "estimates", f"must be among {', '.join(ESTIMATES)}")
        need(bool(self.output_dir), "output_dir", "must not be empty")

    def check_knapp_floor(self) -> None:
        """Raise unless ``L_max`` resolves every Knapp width in ``eps_list``."""
        for eps in self.eps_list:
            floor = math.ceil(4.0 / eps)
            if self.L_max < floor:
                raise ConfigError("eps_list", f"eps={eps:g} is below the L_max floor: needs L_max >= {floor} "
                                              f"(got {self.L_max})")

    # -- serialisation ----------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        types = {f.name: f for f in fields(cls)}
        values = {}
        for number, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {number}", "expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(key, "unknown key")
            values[key] = _parse(key, value, types[key].default if types[key].default is not dataclasses.MISSING else "")
        return cls(**values)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        """Hash of every field except the output directory."""
        body = "\n".join(l for l in self.to_text().splitlines() if not l.startswith("output_dir"))
        return hashlib.sha256(body.encode()).hexdigest()[:16]


def _format(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(":".join(_format(x) for x in item) if isinstance(item, tuple) else _format(item) for item in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _scalar(key: str, text: str, like):
    try:
        if isinstance(like, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r}") from None
    return text


def _parse(key: str, text: str, default):
    if isinstance(default, tuple):
        if not text:
            return ()
        items = [s.strip() for s in text.split(",")]
        sample = default[0] if default else ""
        if isinstance(sample, tuple):
            out = []
            for item in items:
                parts = item.split(":")
                if len(parts) != len(sample):
                    raise ConfigError(key, f"expected {len(sample)} values separated by ':' in {item!r}")
                out.append(tuple(_scalar(key, p.strip(), s) for p, s in zip(parts, sample)))
            return tuple(out)
        return tuple(_scalar(key, s, sample) for s in items)
    return _scalar(key, text, default)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_text(fh.read())
