import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from todalump import cli
from todalump.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, TIMING_FIELDS, UsageError, main, parse_config
from todalump.suites import Settings, run_suite

FAST = ["--samples", "40"]


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_FIELDS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


class TestParsing:
    def test_defaults(self):
        cfg = parse_config(["kernel"], environ={})
        assert cfg.suites == ["kernel"]
        assert cfg.settings == Settings()

    def test_report_runs_every_suite(self):
        assert parse_config(["report"], environ={}).suites == ["exact", "linearized", "fourier", "kernel"]

    def test_flags(self):
        cfg = parse_config(["verify", "exact", "--samples", "5", "--seed", "3", "--n-range=-1:2",
                            "--tol", "bilinear_theta=1e-9", "--parallel"], environ={})
        assert cfg.settings.samples == 5 and cfg.settings.seed == 3
        assert cfg.settings.n_range == (-1, 2)
        assert cfg.tol == {"bilinear_theta": 1e-9}
        assert cfg.parallel

    def test_environment_and_precedence(self):
        env = {"TODALUMP_SEED": "7", "TODALUMP_SAMPLES": "12", "TODALUMP_TOL": "gap_ratio=5,gamma_product=1e-13"}
        cfg = parse_config(["kernel", "--seed", "9"], environ=env)
        assert cfg.settings.seed == 9
        assert cfg.settings.samples == 12
        assert cfg.tol == {"gap_ratio": 5.0, "gamma_product": 1e-13}

    @pytest.mark.parametrize("argv, env", [
        (["verify", "fourier", "--suite", "fourier", "--samples", "0"], {}),
        (["verify", "exact", "--suite", "fourier"], {}),
        (["kernel", "--refine", "1"], {}),
        (["kernel", "--tol", "no_such_check=1"], {}),
        (["kernel", "--order", "3"], {}),
        (["kernel", "--n-range", "3:1"], {}),
        (["kernel", "--half-width", "-2"], {}),
        (["kernel"], {"TODALUMP_SEED": "seven"}),
        (["verify", "spectral"], {}),
        ([], {}),
    ])
    def test_usage_errors(self, argv, env):
        with pytest.raises(UsageError):
            parse_config(argv, environ=env)

    def test_unwritable_json_dir(self, tmp_path):
        with pytest.raises(UsageError):
            parse_config(["kernel", "--json", str(tmp_path / "missing" / "r.json")], environ={})

    def test_csv_dir_is_a_file(self, tmp_path):
        f = tmp_path / "plain"
        f.write_text("x")
        with pytest.raises(UsageError):
            parse_config(["kernel", "--csv-dir", str(f)], environ={})


class TestExitCodes:
    def test_usage_writes_nothing(self, tmp_path, capsys):
        target = tmp_path / "r.json"
        code = main(["verify", "fourier", "--suite", "fourier", "--samples", "0", "--json", str(target)])
        assert code == EXIT_USAGE
        assert not target.exists()
        assert "usage error" in capsys.readouterr().err

    def test_pass(self, tmp_path, capsys):
        target = tmp_path / "r.json"
        assert main(["verify", "exact", *FAST, "--json", str(target)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "10/10 checks passed" in out
        assert json.loads(target.read_text())["status"] == "pass"

    def test_check_failure(self, capsys):
        assert main(["verify", "exact", *FAST, "--tol", "lump_toda_residual=0", "--quiet"]) == EXIT_FAIL
        assert "failed: lump_toda_residual" in capsys.readouterr().out

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "todalump", "--version"], capture_output=True, text=True)
        assert out.returncode == 0 and "todalump" in out.stdout


@pytest.fixture(scope="module")
def exact_report(tmp_path_factory):
    """Two identical exact-suite runs."""
    d = tmp_path_factory.mktemp("rep")
    paths = [d / "a.json", d / "b.json"]
    for p in paths:
        assert main(["verify", "exact", *FAST, "--seed", "11", "--json", str(p), "--quiet"]) == EXIT_OK
    return [json.loads(p.read_text()) for p in paths]


class TestReport:
    def test_schema(self, exact_report):
        rep = exact_report[0]
        assert rep["schema"] == 1
        assert set(rep) >= {"status", "suites", "config", "versions", "artifacts", "started_at", "elapsed"}
        for chk in rep["suites"][0]["checks"]:
            assert chk["status"] in ("pass", "fail", "skipped")
            assert chk["claim"]
            assert chk["worst_residual"] is not None

    def test_identical_apart_from_timing(self, exact_report):
        a, b = (json.dumps(strip_timing(r), sort_keys=True) for r in exact_report)
        assert a == b

    def test_exact_run_has_no_artifacts(self, exact_report):
        assert exact_report[0]["artifacts"] == [] and exact_report[0]["csv_files"] == []

    def test_atomic_write_keeps_old_file(self, tmp_path, monkeypatch):
        target = tmp_path / "r.json"
        target.write_text("old")

        def boom(src, dst):
            raise OSError("disk full")

        monkeypatch.setattr(cli.os, "replace", boom)
        with pytest.raises(OSError):
            cli.write_json_atomic({"a": 1}, target)
        assert target.read_text() == "old"
        assert os.listdir(tmp_path) == ["r.json"]

    def test_nonfinite_becomes_null(self, tmp_path):
        target = tmp_path / "r.json"
        cli.write_json_atomic({"x": float("nan"), "y": np.float64(2.5)}, target)
        assert json.loads(target.read_text()) == {"x": None, "y": 2.5}


class TestCsv:
    def test_symbol_curves(self, tmp_path):
        records = run_suite("fourier", Settings(), only=["symbols_at_origin"])
        files = cli.emit_csv(records, tmp_path)
        assert sorted(p.name for p in files) == [f"symbols_{c}.csv" for c in "JPQR"]
        with open(tmp_path / "symbols_Q.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["xi", "re", "im"]
        data = np.array(rows[1:], dtype=float)
        assert len(data) == 1001 and data[0, 0] == -5 and data[-1, 0] == 5
        origin = data[data[:, 0] == 0.0]
        assert np.hypot(origin[0, 1], origin[0, 2]) < 1e-10
        assert len(rows[1][1].replace("-", "").replace(".", "").split("e")[0]) >= 15

    def test_kernel_modes(self, tmp_path):
        code = main(["kernel", "--half-width", "2", "--refine", "2", "--csv-dir", str(tmp_path / "out"),
                     "--json", str(tmp_path / "k.json"), "--quiet"])
        assert code in (EXIT_OK, EXIT_FAIL)
        rep = json.loads((tmp_path / "k.json").read_text())
        meta = {a["file"]: a for a in rep["artifacts"]}
        nx = meta["kernel_mode_1.csv"]["meta"]["nx"]
        for name in ("kernel_mode_1.csv", "kernel_mode_2.csv"):
            lines = (tmp_path / "out" / name).read_text(encoding="utf-8").splitlines()
            assert lines[0] == "x,y,value"
            assert len(lines) - 1 == nx * nx == meta[name]["rows"]
        assert (tmp_path / "out" / "lump_slice.csv").exists()

    def test_no_artifacts_no_files(self, tmp_path):
        assert cli.emit_csv(run_suite("exact", Settings(samples=5)), tmp_path / "none") == []
        assert not (tmp_path / "none").exists()
