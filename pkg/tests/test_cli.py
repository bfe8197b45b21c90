import csv
import json
import os

import numpy as np
import pytest

from hot_tuner import __version__
from hot_tuner.cli import main
from hot_tuner import verify

from conftest import reference_dict


def write_config(tmp_path, d, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return str(path)


def small_dict(**overrides):
    base = dict(horizon=100, ensemble=3, resamples=500)
    base.update(overrides)
    return reference_dict(**base)


class TestSimulate:
    def test_writes_traces_and_summary(self, tmp_path):
        cfg_path = write_config(tmp_path, small_dict())
        out = str(tmp_path / "out")
        assert main(["simulate", cfg_path, "--out", out]) == 0
        assert sorted(f for f in os.listdir(out) if f.startswith("trace_")) == [
            "trace_0.csv", "trace_1.csv", "trace_2.csv"]
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["version"] == __version__
        assert summary["config"]["horizon"] == 100
        assert "base_seed" in summary
        assert len(summary["sup_V_per_trial"]) == 3
        assert summary["constants"]["c1"] == pytest.approx(0.00125)

    def test_csv_roundtrip_exact(self, tmp_path):
        cfg_path = write_config(tmp_path, small_dict(ensemble=1))
        out = str(tmp_path / "out")
        assert main(["simulate", cfg_path, "--out", out]) == 0
        from hot_tuner.config import load_config
        cfg = load_config(cfg_path)
        trace = verify.run_trajectory(cfg, cfg.trial_seed(0))
        with open(os.path.join(out, "trace_0.csv"), newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == cfg.horizon + 1
        for i, row in enumerate(rows):
            assert float(row["V"]) == trace.V[i]  # bitwise round-trip
            assert float(row["theta_0"]) == trace.theta[i, 0]

    def test_gamma_violation_names_field(self, tmp_path, capsys):
        d = small_dict(gains={"gamma": 0.05, "beta": 0.5, "mu": 0.1})
        cfg_path = write_config(tmp_path, d)
        assert main(["simulate", cfg_path, "--out", str(tmp_path / "o")]) == 2
        assert "gamma" in capsys.readouterr().err

    def test_zero_horizon_rejected(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, small_dict(horizon=0))
        assert main(["simulate", cfg_path, "--out", str(tmp_path / "o")]) == 2
        assert "horizon" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_divergence_exit_code(self, tmp_path, capsys):
        d = small_dict(mode="unrestricted",
                       gains={"gamma": 1e8, "beta": 0.5, "mu": 0.9},
                       theta0=[5.0, 5.0], ensemble=1)
        cfg_path = write_config(tmp_path, d)
        assert main(["simulate", cfg_path, "--out", str(tmp_path / "o")]) == 3
        err = capsys.readouterr().err
        assert "step" in err and "gamma" in err

    def test_emit_plot_data(self, tmp_path):
        cfg_path = write_config(tmp_path, small_dict())
        out = str(tmp_path / "out")
        assert main(["simulate", cfg_path, "--out", out,
                     "--emit-plot-data"]) == 0
        with open(os.path.join(out, "plotdata.csv"), newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert set(rows[0]) == {"k", "mean_Vhat", "envelope"}


class TestVerifyCommand:
    def test_verify_all_passes_on_reference(self, tmp_path):
        cfg_path = write_config(tmp_path, small_dict(horizon=500, ensemble=20))
        out = str(tmp_path / "out")
        assert main(["verify", cfg_path, "--check", "all", "--out", out]) == 0
        payload = json.loads((tmp_path / "out" / "verify_all.json").read_text())
        assert payload["passed"] is True
        assert set(payload["checks"]) == {"decrement", "bound", "rate"}

    def test_verify_decrement_zero_noise(self, tmp_path):
        d = small_dict(noise={"kind": "zero"}, d_max=0.0, sigma_max=0.0)
        cfg_path = write_config(tmp_path, d)
        out = str(tmp_path / "out")
        assert main(["verify", cfg_path, "--check", "decrement", "--out", out]) == 0
        payload = json.loads(
            (tmp_path / "out" / "verify_decrement.json").read_text())
        assert all(p["stderr"] == 0.0
                   for p in payload["checks"]["decrement"]["probes"])

    def test_invalid_alpha_is_usage_error(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, small_dict(alpha=0.5))
        assert main(["verify", cfg_path, "--check", "rate",
                     "--out", str(tmp_path / "o")]) == 2
        assert "alpha" in capsys.readouterr().err

    def test_determinism_modulo_timestamp(self, tmp_path):
        cfg_path = write_config(tmp_path, small_dict(horizon=300, ensemble=10))
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["verify", cfg_path, "--check", "all", "--out", out1]) == 0
        assert main(["verify", cfg_path, "--check", "all", "--out", out2]) == 0
        p1 = json.loads((tmp_path / "a" / "verify_all.json").read_text())
        p2 = json.loads((tmp_path / "b" / "verify_all.json").read_text())
        p1.pop("generated_at"), p2.pop("generated_at")
        assert json.dumps(p1, sort_keys=True) == json.dumps(p2, sort_keys=True)


class TestConstantsCommand:
    def test_reference_values(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, small_dict())
        assert main(["constants", cfg_path]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["c1"] == pytest.approx(0.00125)
        assert payload["c2"] == pytest.approx(19609 / 6144 * 0.1)
        assert payload["gamma_max"] == pytest.approx(0.75 / 16.61875)
        assert payload["K"] > 0 and payload["T"] >= payload["K"]
        assert "theorem4_radius" in payload

    def test_noise_free_perfect_init_all_zero(self, tmp_path, capsys):
        d = small_dict(noise={"kind": "zero"}, d_max=0.0, sigma_max=0.0,
                       theta0=[1.0, -0.5], vartheta0=[1.0, -0.5])
        cfg_path = write_config(tmp_path, d)
        assert main(["constants", cfg_path]) == 0
        payload = json.loads(capsys.readouterr().out)
        for key in ("c2", "c3", "c4", "c5", "K", "T"):
            assert payload[key] == 0.0

    def test_missing_file(self, tmp_path):
        assert main(["constants", str(tmp_path / "absent.json")]) == 2

    def test_writes_file_with_out(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, small_dict())
        out = str(tmp_path / "c")
        assert main(["constants", cfg_path, "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "constants.json"))


class TestThreadCap:
    def test_thread_env_respected(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HOT_TUNER_THREADS", "1")
        cfg_path = write_config(tmp_path, small_dict())
        out1 = str(tmp_path / "a")
        assert main(["simulate", cfg_path, "--out", out1]) == 0
        monkeypatch.setenv("HOT_TUNER_THREADS", "4")
        out2 = str(tmp_path / "b")
        assert main(["simulate", cfg_path, "--out", out2]) == 0
        for t in range(3):
            a = (tmp_path / "a" / f"trace_{t}.csv").read_bytes()
            b = (tmp_path / "b" / f"trace_{t}.csv").read_bytes()
            assert a == b
