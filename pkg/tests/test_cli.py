import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from wavepacket_lab.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_MISSING, EXIT_PASS, main, run
from wavepacket_lab.config import OUT_ENV, ConfigError, ExperimentConfig, load_config

ROOT = Path(__file__).resolve().parents[1]
SMOKE = ROOT / "configs" / "smoke.cfg"
DEFAULT = ROOT / "configs" / "default.cfg"


def small(tmp_path, **changes):
    base = load_config(SMOKE).replace(output_dir=str(tmp_path / "out"))
    return base.replace(**changes)


def write_config(tmp_path, config, name="run.cfg"):
    path = tmp_path / name
    path.write_text(config.to_text())
    return path


class TestConfig:
    def test_shipped_configs_load(self):
        assert load_config(DEFAULT).n == 3
        assert load_config(SMOKE).data == "zero"

    def test_default_file_matches_defaults(self):
        assert load_config(DEFAULT).replace(output_dir="x") == ExperimentConfig(output_dir="x")

    def test_round_trip(self):
        c = ExperimentConfig(n=4, eta=0.3, seeds=(3, 5), constants=((1.5, 2.0),), output_dir="o")
        assert ExperimentConfig.from_text(c.to_text()) == c

    @settings(max_examples=25, deadline=None)
    @given(eta=st.floats(0.01, 0.99), T=st.floats(1.0, 1024.0), seeds=st.lists(st.integers(0, 99), min_size=1, max_size=5, unique=True))
    def test_round_trip_property(self, eta, T, seeds):
        c = ExperimentConfig(eta=eta, T=T, seeds=tuple(seeds), output_dir="o")
        assert ExperimentConfig.from_text(c.to_text()) == c

    def test_comments_and_blank_lines(self):
        c = ExperimentConfig.from_text("# note\n\nn = 2   # the plane\nL_max=64\n")
        assert c.n == 2

    @pytest.mark.parametrize("text,field", [
        ("n = 5", "n"),
        ("eta = 0", "eta"),
        ("bogus = 1", "bogus"),
        ("mu_list = 1.0, 2.0", "mu_list"),
        ("N = 3", "N"),
        ("seeds = 1, 2\nholdout_seeds = 2", "holdout_seeds"),
        ("T = abc", "T"),
        ("constants = 2:2:2", "constants"),
    ])
    def test_field_level_errors(self, text, field):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig.from_text(text)
        assert err.value.field == field

    def test_digest_ignores_output_dir(self):
        a = ExperimentConfig(output_dir="a")
        assert a.digest() == a.replace(output_dir="b").digest()
        assert a.digest() != a.replace(eta=0.2).digest()

    def test_environment_default(self, monkeypatch):
        monkeypatch.setenv(OUT_ENV, "/tmp/somewhere")
        assert ExperimentConfig().output_dir == "/tmp/somewhere"


class TestExitCodes:
    def test_verify_needs_constants(self, tmp_path):
        assert run(small(tmp_path), "verify") == EXIT_MISSING

    def test_report_needs_outputs(self, tmp_path):
        assert run(small(tmp_path), "report") == EXIT_MISSING

    def test_missing_config_file(self, tmp_path):
        assert main(["propagate", "--config", str(tmp_path / "nope.cfg")]) == EXIT_MISSING

    def test_invalid_config_file(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("dt = -1\n")
        assert main(["propagate", "--config", str(path)]) == EXIT_CONFIG
        assert "dt" in capsys.readouterr().err

    def test_knapp_floor(self, tmp_path, capsys):
        cfg = write_config(tmp_path, small(tmp_path, L_max=16, eps_list=(0.25, 0.125, 0.0625), n=4))
        assert main(["knapp-scan", "--config", str(cfg)]) == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "L_max floor" in err and "eps=0.125" in err

    def test_unknown_estimate(self, tmp_path):
        cfg = small(tmp_path)
        run(cfg, "fit-constants")
        assert run(cfg, "verify", ["nonsense"]) == EXIT_CONFIG

    def test_bad_threads(self, tmp_path):
        cfg = write_config(tmp_path, small(tmp_path))
        assert main(["propagate", "--config", str(cfg), "--threads", "0"]) == EXIT_CONFIG


class TestPipeline:
    def test_zero_data_smoke(self, tmp_path):
        cfg = write_config(tmp_path, small(tmp_path))
        out = tmp_path / "out"
        assert main(["fit-constants", "--config", str(cfg), "--threads", "1"]) == EXIT_PASS
        assert main(["verify", "--config", str(cfg)]) == EXIT_PASS
        assert main(["report", "--config", str(cfg)]) == EXIT_PASS
        summary = json.loads((out / "summary.json").read_text())
        assert summary["verdict"] == "PASS"
        record = json.loads((out / "verify_dispersive.json").read_text())
        assert record["config_hash"] == load_config(cfg).digest()
        assert record["seeds"] == [100]

    def test_idempotent(self, tmp_path):
        cfg = small(tmp_path, data="radial_bump", T=4.0)
        out = tmp_path / "out"
        run(cfg, "propagate")
        run(cfg, "packets")
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        run(cfg, "propagate")
        run(cfg, "packets")
        assert first == {p.name: p.read_bytes() for p in out.iterdir()}

    def test_out_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path, small(tmp_path, data="radial_bump", T=2.0))
        other = tmp_path / "elsewhere"
        assert main(["propagate", "--config", str(cfg), "--out", str(other)]) == EXIT_PASS
        assert (other / "propagate.csv").exists() and (other / "plot_propagate.csv").exists()

    def test_propagate_random_conserves_energy(self, tmp_path):
        cfg = small(tmp_path, data="random", N=2, T=8.0)
        assert run(cfg, "propagate") == EXIT_PASS
        record = json.loads((tmp_path / "out" / "propagate.json").read_text())
        assert record["energy_drift"] <= 1e-6

    def test_packets_csv_columns(self, tmp_path):
        cfg = small(tmp_path, data="random", N=2)
        assert run(cfg, "packets") == EXIT_PASS
        header = (tmp_path / "out" / "packets.csv").read_text().splitlines()[0]
        assert header == "l,i,k,re,im"

    def test_threshold_below_critical_exponent(self, tmp_path):
        # r = 3 lies below the spherical threshold, so the norm keeps growing
        cfg = small(tmp_path, r_exponent=3.0, T=16.0)
        run(cfg, "fit-constants")
        assert run(cfg, "verify", ["threshold"]) == EXIT_PASS

    def test_failure_exit_code(self, tmp_path):
        # r = 4.5 at short windows has not saturated yet, so the threshold check fails
        cfg = small(tmp_path, r_exponent=4.5, T=4.0)
        run(cfg, "fit-constants")
        assert run(cfg, "verify", ["threshold"]) == EXIT_FAIL
