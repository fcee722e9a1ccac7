import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from opd_lab.cli import main

SIM = ["simulate", "--hurst", "0.8", "--psi", "0.6", "--phi", "0.8", "--n", "1000", "--seed", "7"]


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    if capsys is None:
        return code
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


def write_series(path, header, columns):
    with open(path, "w", newline="") as handle:
        w = csv.writer(handle)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) for v in row])


class TestSimulate:
    def test_rows_and_files(self, tmp_path, capsys):
        code, out, _ = run(SIM + ["--out-dir", tmp_path, "--cumsum"], capsys)
        assert code == 0
        rows = read_csv(tmp_path / "path.csv")
        assert rows[0] == ["j", "y1", "y2"] and len(rows) == 1001
        assert (tmp_path / "cumsum.csv").exists()
        cfg = json.loads((tmp_path / "config.json").read_text())
        assert cfg["hurst"] == 0.8 and cfg["n"] == 1000 and cfg["seed"] == 7
        assert json.loads(out)["rows"] == 1000

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(SIM + ["--out-dir", a]) == 0
        assert run(["--threads", "3"] + SIM + ["--out-dir", b]) == 0
        for name in ("path.csv", "config.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_config_file_with_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"hurst": 0.7, "psi": 0.6, "phi": 0.8, "n": 50, "seed": 1}))
        assert run(["simulate", "--config", cfg, "--n", "20", "--out-dir", tmp_path / "o"]) == 0
        assert len(read_csv(tmp_path / "o" / "path.csv")) == 21

    def test_bad_hurst(self, tmp_path, capsys):
        argv = list(SIM)
        argv[2] = "1.2"
        code, _, err = run(argv + ["--out-dir", tmp_path], capsys)
        assert code == 2
        assert "(0, 1)" in err

    def test_missing_n(self, tmp_path):
        assert run(["simulate", "--hurst", "0.8", "--psi", "0.6", "--phi", "0.8", "--out-dir", tmp_path]) == 2

    def test_unknown_flag(self):
        assert run(["simulate", "--bogus"]) == 2


class TestOpd:
    @pytest.fixture
    def path_csv(self, tmp_path):
        assert run(SIM + ["--out-dir", tmp_path]) == 0
        return tmp_path / "path.csv"

    def test_file_vs_itself(self, path_csv, capsys):
        code, out, _ = run(["opd", path_csv, "--columns", "y1,y1", "--h", "2"], capsys)
        assert code == 0 and json.loads(out)["opd"] == 1.0

    def test_two_files(self, path_csv, capsys):
        code, out, _ = run(["opd", path_csv, path_csv, "--h", "1"], capsys)
        assert code == 0 and json.loads(out)["opd"] == 1.0

    def test_negate(self, path_csv, tmp_path, capsys):
        rows = np.array(read_csv(path_csv)[1:], dtype=float)
        neg = tmp_path / "neg.csv"
        write_series(neg, ["y1", "y2"], [rows[:, 1], -rows[:, 2]])
        code, out_flag, _ = run(["opd", path_csv, "--h", "1", "--negate", "--increments"], capsys)
        assert code == 0
        code, out_file, _ = run(["opd", neg, "--h", "1", "--increments"], capsys)
        assert code == 0
        assert json.loads(out_flag) == json.loads(out_file)

    def test_correlated_increments(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(10**5)
        b = 0.6 * a + 0.8 * rng.standard_normal(10**5)
        f = tmp_path / "inc.csv"
        write_series(f, ["y1", "y2"], [a, b])
        code, out, _ = run(["opd", f, "--h", "1", "--increments", "--out-dir", tmp_path / "o"], capsys)
        assert code == 0
        p = 0.5 + math.asin(0.6) / math.pi
        expected = (p - 0.5) / 0.5
        assert expected == pytest.approx(0.4097, abs=1e-4)
        assert json.loads(out)["opd"] == pytest.approx(expected, abs=0.02)
        assert json.loads((tmp_path / "o" / "opd.json").read_text()) == json.loads(out)

    def test_length_mismatch(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_series(a, ["x"], [np.arange(10.0)])
        write_series(b, ["x"], [np.arange(12.0)])
        assert run(["opd", a, b, "--h", "1"]) == 2

    def test_missing_file(self, tmp_path):
        assert run(["opd", tmp_path / "nope.csv", "--h", "1"]) == 2

    def test_degenerate_is_numeric_failure(self, tmp_path, capsys):
        f = tmp_path / "mono.csv"
        write_series(f, ["y1", "y2"], [np.arange(30.0), 2 * np.arange(30.0)])
        code, _, err = run(["opd", f, "--h", "2"], capsys)
        assert code == 3 and "numerical failure" in err


class TestLimitExperiment:
    def srd_args(self, out, threads=1):
        return [
            "--threads", threads, "limit-experiment", "--hurst", "0.7", "--psi", "0.6", "--phi", "0.8",
            "--h", "2", "--path-n", "1000", "--replications", "30", "--regime", "srd",
            "--seed", "5", "--quiet", "--out-dir", out,
        ]

    def test_srd_outputs(self, tmp_path):
        assert run(self.srd_args(tmp_path)) == 0
        rows = read_csv(tmp_path / "values.csv")
        assert rows[0] == ["rep", "value"] and len(rows) == 31
        assert read_csv(tmp_path / "qq_normal.csv")[0] == ["q_sample", "q_reference"]
        assert not (tmp_path / "qq_rosenblatt.csv").exists()
        diag = json.loads((tmp_path / "diagnostics.json").read_text())
        assert "ks_vs_normal_below_critical" in diag
        cfg = json.loads((tmp_path / "config.json").read_text())
        assert cfg["experiment"]["replications"] == 30 and cfg["experiment"]["master_seed"] == 5
        assert cfg["reference"] is None

    def test_thread_independent(self, tmp_path):
        assert run(self.srd_args(tmp_path / "a", 1)) == 0
        assert run(self.srd_args(tmp_path / "b", 4)) == 0
        for name in ("values.csv", "qq_normal.csv", "diagnostics.json", "config.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_lrd_outputs(self, tmp_path):
        argv = [
            "limit-experiment", "--hurst", "0.9", "--psi", "0.6", "--phi", "0.8", "--h", "1",
            "--path-n", "2000", "--replications", "20", "--regime", "lrd", "--seed", "1",
            "--weight-reps", "10000", "--reference-inner-n", "1000", "--quiet", "--out-dir", tmp_path,
        ]
        assert run(argv) == 0
        assert len(read_csv(tmp_path / "qq_rosenblatt.csv")) == 21
        diag = json.loads((tmp_path / "diagnostics.json").read_text())
        assert "ks_vs_rosenblatt_mixture" in diag and "skewness_significant" in diag
        assert json.loads((tmp_path / "weights.json").read_text())["h"] == 1

    def test_regime_mismatch(self, tmp_path, capsys):
        argv = self.srd_args(tmp_path)
        argv[argv.index("srd")] = "lrd"
        code, _, err = run(argv, capsys)
        assert code == 2 and "d*" in err

    def test_missing_config(self, tmp_path):
        assert run(["limit-experiment", "--config", tmp_path / "none.json", "--out-dir", tmp_path]) == 2

    def test_config_file(self, tmp_path):
        cfg = {
            "model": {"hurst": 0.7, "psi": 0.6, "phi": 0.8},
            "h": 1,
            "path_n": 500,
            "replications": 10,
            "regime": "srd",
            "master_seed": 2,
        }
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(cfg))
        assert run(["limit-experiment", "--config", path, "--replications", "12", "--quiet", "--out-dir", tmp_path]) == 0
        assert len(read_csv(tmp_path / "values.csv")) == 13


class TestRosenblatt:
    def test_rows(self, tmp_path):
        argv = ["rosenblatt", "--d-star", "0.3", "--draws", "100", "--inner-n", "10000", "--seed", "1", "--out-dir", tmp_path]
        assert run(argv) == 0
        rows = read_csv(tmp_path / "rosenblatt.csv")
        assert rows[0] == ["z"] and len(rows) == 101
        side = json.loads((tmp_path / "rosenblatt.json").read_text())
        assert {"d_star", "inner_n", "draws", "master_seed"} <= set(side)

    def test_regime(self, tmp_path, capsys):
        code, _, err = run(["rosenblatt", "--d-star", "0.2", "--draws", "10", "--out-dir", tmp_path], capsys)
        assert code == 2 and "1/4" in err

    def test_deterministic(self, tmp_path):
        base = ["rosenblatt", "--d-star", "0.35", "--draws", "9", "--inner-n", "2000", "--seed", "4"]
        assert run(["--threads", "1"] + base + ["--out-dir", tmp_path / "a"]) == 0
        assert run(["--threads", "4"] + base + ["--out-dir", tmp_path / "b"]) == 0
        assert (tmp_path / "a" / "rosenblatt.csv").read_bytes() == (tmp_path / "b" / "rosenblatt.csv").read_bytes()


class TestWeights:
    def test_writes_weights(self, tmp_path):
        argv = ["weights", "--hurst", "0.8", "--psi", "0.6", "--phi", "0.8", "--h", "1", "--reps", "10000", "--out-dir", tmp_path]
        assert run(argv) == 0
        w = json.loads((tmp_path / "weights.json").read_text())
        assert len(w["alpha_tilde"]) == 2 and w["reps"] == 10000

    def test_bad_reps(self, tmp_path):
        argv = ["weights", "--hurst", "0.8", "--psi", "0.6", "--phi", "0.8", "--h", "1", "--reps", "10", "--out-dir", tmp_path]
        assert run(argv) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "opd_lab", *map(str, SIM), "--out-dir", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "path.csv").exists()


def test_thread_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("OPD_LAB_THREADS", "2")
    assert run(SIM + ["--out-dir", tmp_path]) == 0
    monkeypatch.setenv("OPD_LAB_THREADS", "zero")
    assert run(SIM + ["--out-dir", tmp_path]) == 2
