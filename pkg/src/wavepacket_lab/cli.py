"""Command-line experiment runner.

``wavepacket-lab <command> --config PATH [--threads N] [--out DIR]``

Every command writes ``<name>.csv`` (one row per scan point) and
``<name>.json`` (summary, verdict, seeds and config hash) into the output
directory.  Exit status: 0 when every verdict passes (or does not apply),
1 on a failure, 2 when a fit is inconclusive, 3 for an invalid
configuration and 4 when a prerequisite artifact is missing.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ESTIMATES, OUT_ENV, ConfigError, ExperimentConfig, load_config

__all__ = ["COMMANDS", "EXIT_PASS", "EXIT_FAIL", "EXIT_INCONCLUSIVE", "EXIT_CONFIG", "EXIT_MISSING", "run", "main"]

COMMANDS = ("propagate", "packets", "fit-constants", "verify", "knapp-scan", "morawetz", "report")
EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG, EXIT_MISSING = 0, 1, 2, 3, 4

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class MissingPrerequisite(RuntimeError):
    pass


def _exit_code(verdict: str) -> int:
    from .analysis import FAIL, INCONCLUSIVE

    if verdict == FAIL:
        return EXIT_FAIL
    if verdict == INCONCLUSIVE:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def _write(report, out: Path, name: str, config: ExperimentConfig, command: str, plot=None) -> str:
    report.to_csv(out / f"{name}.csv")
    report.to_json(out / f"{name}.json", config_hash=config.digest(), command=command,
                   config_seeds=list(config.seeds))
    if plot is not None:
        # two-column figure data: (x, y)
        header, xs, ys = plot
        with open(out / f"plot_{name}.csv", "w") as fh:
            fh.write(",".join(header) + "\n")
            for x, y in zip(xs, ys):
                fh.write(f"{float(x)!r},{float(y)!r}\n")
    return report.verdict


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


def _data(config: ExperimentConfig, seed: int | None = None):
    from . import propagator as P

    seed = config.seeds[0] if seed is None else seed
    if config.data == "zero":
        return P.make_zero(config.n)
    if config.data == "radial_bump":
        return P.make_radial_bump(config.n)
    if config.data == "knapp":
        import math

        floor = P.knapp_lmax_floor(config.eps)
        if config.L_max < floor:
            raise ConfigError("eps", f"eps={config.eps:g} is below the L_max floor: needs L_max >= {floor} "
                                     f"(got {config.L_max})")
        return P.make_knapp(config.n, config.eps, l_max=min(math.ceil(12 / config.eps), config.L_max))
    return P.make_random_localized(config.n, config.N, seed)


def _family(config: ExperimentConfig):
    from . import propagator as P

    if config.data == "zero":
        return lambda n, N, seed: P.make_zero(n)
    if config.data == "radial_bump":
        return lambda n, N, seed: P.make_radial_bump(n)
    return lambda n, N, seed: P.make_random_localized(n, N, seed)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _propagate(config, out):
    import numpy as np

    from .analysis import PASS, FAIL, EstimateReport, EvaluationGrid, lr_norms, sup_norm
    from .propagator import FieldSampler

    modes = _data(config)
    fs = FieldSampler(modes)
    times = np.arange(0.0, config.T + config.dt / 2, config.dt)
    l2, missing = lr_norms(fs, times, 2.0, EvaluationGrid(radial_per_unit=config.panel))
    norm0 = modes.norm()
    rep = EstimateReport("propagate", seeds=tuple(config.seeds[:1]), grid={"T": config.T, "dt": config.dt})
    for t, v, m in zip(times, l2, missing):
        rep.add(t=float(t), l2_norm=float(v), sup_norm=sup_norm(fs, t, refine=1) if len(modes) else 0.0,
                missing=float(m))
    drift = float(np.max(np.abs(l2 / norm0 - 1))) if norm0 > 0 else 0.0
    rep.summary.update(energy_drift=drift, tolerance=1e-3, verdict=PASS if drift <= 1e-3 else FAIL)
    return _write(rep, out, "propagate", config, "propagate", (("t", "sup_norm"), times, rep.column("sup_norm")))


def _packets(config, out):
    from .analysis import PASS, FAIL, EstimateReport
    from .wavepackets import packet_decomposition, packet_energy_bounds

    modes = _data(config)
    pc = packet_decomposition(modes, config.K_max)
    rep = EstimateReport("packets", seeds=tuple(config.seeds[:1]), grid={"K_max": config.K_max})
    ks = pc.ks
    for row, idx in enumerate(pc.indices):
        for j in pc.significant_ks():
            v = pc.table[row, j]
            rep.add(l=idx.l, i=idx.i, k=int(ks[j]), re=float(v.real), im=float(v.imag))
    lo, hi = packet_energy_bounds(config.n)
    e, ef = pc.energy(), modes.energy()
    ok = ef == 0 or lo * ef <= e <= hi * ef
    tail = pc.tail_fraction(config.K_max - 1) if len(modes) else 0.0
    rep.summary.update(packet_energy=e, data_energy=ef, tail_fraction=tail, verdict=PASS if ok else FAIL)
    return _write(rep, out, "packets", config, "packets")


def _fit_constants(config, out):
    import math

    import numpy as np

    from .analysis import PASS, FAIL, EstimateReport
    from .wavepackets import ScanGrid, fit_constants, psi_table

    ls = tuple(l for l in (0, 1, 4, 16, 64) if l <= config.L_max)
    grid = ScanGrid(ls=ls, m_max=config.m_max, r_max=config.R, dm=config.dm, dr=config.dr)
    table = psi_table(config.n, grid.ls, grid.ms, grid.rs())
    path = out / "constants.csv"
    rep = EstimateReport("fit_constants", grid={"ls": list(ls), "m_max": config.m_max, "R": config.R,
                                                "dm": config.dm, "dr": config.dr, "digest": grid.digest()})
    ok = True
    for k, (N1, N2) in enumerate(config.constants):
        C = fit_constants(config.n, N1, N2, grid, psi_values=table)
        C.to_csv(path, append=k > 0)
        for reg, val in C.C.items():
            rep.add(N1=N1, N2=N2, regime=reg.name, C=val)
            ok = ok and math.isfinite(val) and val >= 0
    rep.summary.update(verdict=PASS if ok else FAIL, max_psi=float(np.abs(table).max()))
    return _write(rep, out, "fit_constants", config, "fit-constants")


def _require_constants(config, out):
    from .wavepackets import ConstantsTable

    path = out / "constants.csv"
    if not path.exists():
        raise MissingPrerequisite(f"{path} not found; run 'fit-constants' first")
    tables = [t for t in ConstantsTable.read_csv(path) if t.n == config.n]
    if not tables:
        raise MissingPrerequisite(f"{path} holds no constants for n={config.n}; rerun 'fit-constants'")
    return tables


def _verify(config, out, which):
    import math

    from . import analysis as A
    from .propagator import make_radial_bump

    tables = _require_constants(config, out)
    family = _family(config)
    per_unit = 1.0 / config.dt
    verdicts = {}
    for name in which:
        if name == "dispersive":
            rep = A.verify_dispersive(config.n, config.holdout_N, config.holdout_seeds, calibration_N=config.N,
                                      calibration_seeds=config.seeds, family=family)
            plot = None
        elif name == "endpoint":
            if config.n == 2:
                rep = A.verify_endpoint(2, config.N_list, config.eta, r=math.inf, q=2.25, seeds=config.seeds,
                                        T=config.T, tolerance=0.6, family=family, per_unit_t=per_unit)
            else:
                rep = A.verify_endpoint(config.n, config.N_list, config.eta, r=config.r_exponent,
                                        seeds=config.seeds, T=config.T, family=family, per_unit_t=per_unit)
            plot = (("N", "max_ratio"), sorted(set(rep.column("N"))), rep.summary.get("max_ratios", []))
        elif name == "dual_scale":
            if config.n != 3:
                raise ConfigError("estimates", "dual_scale runs in n = 3 only")
            rep = A.verify_dual_scale(config.dual_N_list, config.mu_list, config.eta, seeds=config.seeds[:4],
                                      T=min(config.T, 16.0), family=family, per_unit_t=per_unit)
            plot = None
        elif name == "threshold":
            rep = A.threshold_scan(make_radial_bump(config.n), config.r_exponent, (config.T / 2, config.T))
            growth = rep.summary["growth"]
            critical = 2 * (config.n - 1) / (config.n - 2) if config.n > 2 else math.inf
            ok = growth <= 0.02 if config.r_exponent > critical else growth >= 0.10
            rep.summary.update(critical=critical, verdict=A.PASS if ok else A.FAIL)
            plot = (("T", "norm"), rep.column("T"), rep.column("norm"))
        else:
            if config.n != 3:
                raise ConfigError("estimates", "morawetz runs in n = 3 only")
            data = _data(config) if config.data != "random" else make_radial_bump(3)
            rep = A.verify_morawetz(config.morawetz_eta, (8.0, config.T, 2 * config.T), data=data,
                                    calibration_seeds=(-1, *config.seeds[:4]),
                                    holdout_seeds=config.holdout_seeds[:5])
            plot = None
        rep.summary["constants_grid"] = tables[0].grid_hash
        verdicts[name] = _write(rep, out, f"verify_{name}", config, "verify", plot)
    return A.combine_verdicts(list(verdicts.values()))


def _knapp(config, out):
    from .analysis import verify_knapp_sharpness

    config.check_knapp_floor()
    if config.n not in (3, 4):
        raise ConfigError("n", "knapp-scan runs in n = 3 or n = 4")
    rep = verify_knapp_sharpness(config.eps_list, n=config.n, r=config.r_exponent, l_max_cap=config.L_max)
    return _write(rep, out, "knapp", config, "knapp-scan", (("eps", "ratio"), rep.column("eps"), rep.column("ratio")))


def _morawetz(config, out):
    import numpy as np

    from . import analysis as A
    from .propagator import FieldSampler, make_radial_bump

    if config.n != 3:
        raise ConfigError("n", "morawetz runs in n = 3")
    rep = A.verify_morawetz(config.morawetz_eta, (8.0, config.T, 2 * config.T),
                            calibration_seeds=(-1, *config.seeds[:4]), holdout_seeds=config.holdout_seeds[:5])
    grid = np.geomspace(1e-3, 100.0, 4000)
    neg = {n: A.morawetz_negativity_scan(n, e, grid) for n, e in ((3, 1.0), (4, 0.1))}
    rng = np.random.Generator(np.random.Philox(config.seeds[0]))
    d = rng.normal(size=(50, 3))
    x = d / np.linalg.norm(d, axis=1)[:, None] * rng.uniform(2.5, 5.5, 50)[:, None]
    pts = np.column_stack([np.full(50, 4.0), x])
    fs = FieldSampler(make_radial_bump(3))
    residual = A.verify_energy_momentum_identity(fs, pts)
    control = A.verify_energy_momentum_identity(A.FrozenField(fs, 4.0), pts)
    ok = max(neg.values()) <= 0 and residual <= 1e-3 and control > 1e-3
    rep.summary.update(negativity_max=max(neg.values()), identity_residual=residual, control_residual=control,
                       verdict=A.combine_verdicts([rep.verdict, A.PASS if ok else A.FAIL]))
    return _write(rep, out, "morawetz", config, "morawetz",
                  (("T", "value"), [r["T"] for r in rep.rows if r["kind"] == "scan"],
                   [r["value"] for r in rep.rows if r["kind"] == "scan"]))


def _report(config, out):
    from .analysis import combine_verdicts

    records = []
    for path in sorted(out.glob("*.json")):
        if path.name == "summary.json":
            continue
        with open(path) as fh:
            records.append(json.load(fh))
    if not records:
        raise MissingPrerequisite(f"no reports in {out}; run a command first")
    verdict = combine_verdicts([r.get("verdict", "N/A") for r in records])
    with open(out / "summary.csv", "w") as fh:
        fh.write("name,command,verdict,config_hash,grid_hash\n")
        for r in records:
            fh.write(f"{r['name']},{r.get('command', '')},{r.get('verdict', 'N/A')},{r.get('config_hash', '')},"
                     f"{r['grid_hash']}\n")
    with open(out / "summary.json", "w") as fh:
        json.dump({"verdict": verdict, "config_hash": config.digest(), "seeds": list(config.seeds),
                   "reports": [r["name"] for r in records]}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return verdict


def run(config: ExperimentConfig, command: str, estimates=None, out: str | os.PathLike | None = None) -> int:
    """Execute one command; returns the exit status."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    out = Path(out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if command == "propagate":
            verdict = _propagate(config, out)
        elif command == "packets":
            verdict = _packets(config, out)
        elif command == "fit-constants":
            verdict = _fit_constants(config, out)
        elif command == "verify":
            which = tuple(estimates) if estimates else config.estimates
            bad = [e for e in which if e not in ESTIMATES]
            if bad:
                raise ConfigError("estimates", f"unknown estimate {bad[0]!r}")
            verdict = _verify(config, out, which)
        elif command == "knapp-scan":
            verdict = _knapp(config, out)
        elif command == "morawetz":
            verdict = _morawetz(config, out)
        else:
            verdict = _report(config, out)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingPrerequisite as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_MISSING
    print(f"{command}: {verdict}")
    return _exit_code(verdict)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wavepacket-lab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("estimates", nargs="*", help="estimates for 'verify' (default: from the config)")
    parser.add_argument("--config", help="key = value configuration file (default: built-in defaults)")
    parser.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    parser.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or the config)")
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("invalid config: threads: must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_MISSING
    return run(config, args.command, args.estimates, args.out)


if __name__ == "__main__":
    sys.exit(main())
