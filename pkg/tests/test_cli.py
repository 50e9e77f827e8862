import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from anisonls import grid as gs
from anisonls import io
from anisonls.cli import main
from anisonls.functionals import ModelParams, StatePair, project_state

from conftest import gaussian


def write_config(path, **sections):
    path.write_text(json.dumps(sections))
    return str(path)


def read(path):
    return json.loads(path.read_text())


@pytest.fixture
def gaussian_files(tmp_path):
    grid = gs.Grid(8.0, 8.0, 64, 64)
    u, v = gaussian(grid, amp=1.5), gaussian(grid, wx=1.2, amp=1.0)
    io.write_agf1(tmp_path / "g_u.agf", u, 0.75)
    io.write_agf1(tmp_path / "g_v.agf", v, 0.75)
    return tmp_path / "g_u.agf", tmp_path / "g_v.agf"


class TestSolveScalar:
    def test_converges_and_writes_artifacts(self, tmp_path, schema_validator):
        code = main(["solve-scalar", "--set", "scalar.s=0.9", "--set", "scalar.p=6", "--out", str(tmp_path)])
        assert code == 0
        report = read(tmp_path / "scalar_report.json")
        schema_validator("scalar_report", report)
        assert report["converged"] is True
        assert report["residuals"]["pohozaev"] <= 1e-6
        field, s = io.read_agf1(tmp_path / "base_profile.agf")
        assert s == 0.9 and field.values.min() >= 0
        io.read_agf1(tmp_path / report["files"]["scaled_profile"])

    def test_exponent_above_window(self, tmp_path, capsys):
        # 2(1+s)/(1-s) = 14 at s = 0.75
        config = write_config(tmp_path / "c.json", scalar={"s": 0.75, "p": 14.1})
        assert main(["solve-scalar", "--config", config, "--out", str(tmp_path)]) == 1
        assert "2(1+s)/(1-s)" in capsys.readouterr().err

    def test_iteration_cap_gives_numerical_exit(self, tmp_path, schema_validator):
        code = main(["solve-scalar", "--max-iters", "2", "--grid", "64,256,10,64", "--out", str(tmp_path)])
        assert code == 2
        report = read(tmp_path / "scalar_report.json")
        schema_validator("scalar_report", report)
        assert report["converged"] is False

    def test_non_positive_mass(self, tmp_path):
        assert main(["solve-scalar", "--set", "scalar.mass=0", "--out", str(tmp_path)]) == 1


class TestConfig:
    def test_negative_mass_rejected_before_compute(self, tmp_path, capsys):
        config = write_config(tmp_path / "c.json", params={"a": -1.0})
        assert main(["solve-system", "--config", config, "--out", str(tmp_path)]) == 1
        assert "a" in capsys.readouterr().err
        assert not (tmp_path / "report.json").exists()

    def test_lower_window_named(self, tmp_path, capsys):
        assert main(["solve-system", "--set", "params.p=3.5", "--out", str(tmp_path)]) == 1
        assert "2(1+3s)/(1+s)" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "argv",
        [
            ["solve-scalar", "--grid", "64,64,8"],
            ["solve-scalar", "--grid", "63,64,8,8"],
            ["solve-scalar", "--set", "nokey"],
            ["solve-scalar", "--set", "options.unknown=1"],
            ["solve-scalar", "--config", "/nonexistent/config.json"],
            ["no-such-command"],
        ],
    )
    def test_usage_errors_exit_one(self, tmp_path, argv):
        assert main(argv + ["--out", str(tmp_path)] if argv[0] != "no-such-command" else argv) == 1

    def test_bad_json_config(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        assert main(["constants", "--config", str(path), "--out", str(tmp_path)]) == 1


class TestConstants:
    def test_symmetric_table(self, tmp_path, schema_validator):
        code = main(["constants", "--set", "params.r1=2", "--set", "params.r2=3", "--out", str(tmp_path)])
        assert code == 0
        table = read(tmp_path / "constants.json")
        schema_validator("constants", table)
        assert table["tau"] == pytest.approx(2 / 7, rel=1e-15)
        assert table["mass_threshold"]["b"] == pytest.approx(table["params"]["a"], rel=1e-10)
        assert table["m_p"] == pytest.approx(table["m_q"], rel=1e-12)
        assert table["c0"] > 0 and table["delta"] > 0
        assert table["beta_threshold"]["p_mu1_a_r1"]["raw_value"] == 0.0


class TestFiberScan:
    def test_gaussian_scan(self, tmp_path, gaussian_files, schema_validator):
        u, v = gaussian_files
        code = main(["fiber-scan", "--u", str(u), "--v", str(v), "--n", "4001", "--out", str(tmp_path)])
        assert code == 0
        summary = read(tmp_path / "fiber_scan.json")
        schema_validator("fiber_scan", summary)
        with (tmp_path / "fiber_scan.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        t = np.array([float(r["t"]) for r in rows])
        slope = np.array([float(r["phi_prime"]) for r in rows])
        assert np.all(np.diff(t) > 0)
        assert np.count_nonzero(np.diff(np.sign(slope)) != 0) == 1
        step = t[1] / t[0]
        assert summary["projection_time"] / step <= summary["argmax_t"] <= summary["projection_time"] * step

    def test_inadmissible_upper_end(self, tmp_path, gaussian_files, capsys):
        u, v = gaussian_files
        assert main(["fiber-scan", "--u", str(u), "--v", str(v), "--t-hi", "0.02", "--out", str(tmp_path)]) == 1
        assert "t_hi" in capsys.readouterr().err

    def test_needs_state(self, tmp_path):
        assert main(["fiber-scan", "--out", str(tmp_path)]) == 1


class TestVerify:
    def test_gaussian_state_fails_checklist(self, tmp_path, gaussian_files, schema_validator, capsys):
        u, v = gaussian_files
        assert main(["verify", "--u", str(u), "--v", str(v), "--out", str(tmp_path)]) == 2
        result = read(tmp_path / "verify.json")
        schema_validator("verify", result)
        assert not result["checklist"]["pohozaev"]["pass"]
        assert "FAIL" in capsys.readouterr().out

    def test_missing_file(self, tmp_path, gaussian_files):
        u, _ = gaussian_files
        assert main(["verify", "--u", str(u), "--v", str(tmp_path / "missing.agf"), "--out", str(tmp_path)]) == 1
        assert main(["verify", "--report", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1

    def test_corrupt_file(self, tmp_path, gaussian_files):
        u, v = gaussian_files
        v.write_bytes(b"XXXX" + v.read_bytes()[4:])
        assert main(["verify", "--u", str(u), "--v", str(v), "--out", str(tmp_path)]) == 1


def test_console_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "anisonls", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for command in ("solve-scalar", "solve-system", "constants", "fiber-scan", "verify"):
        assert command in out.stdout


@pytest.mark.slow
def test_system_pipeline(tmp_path, schema_validator):
    out = tmp_path / "run"
    code = main(["solve-system", "--sweep", "--set", "options.n_seeds=2", "--seed", "5", "--out", str(out)])
    assert code == 0
    report = read(out / "report.json")
    schema_validator("solve_report", report)
    assert all(item["pass"] for item in report["checklist"].values())
    summary = read(out / "summary.json")
    schema_validator("sweep_summary", summary)
    assert set(summary["seeds"]) == {"5", "6"}
    for seed in ("5", "6"):
        schema_validator("solve_report", read(out / summary["seeds"][seed]["report"]))

    first, second = tmp_path / "v1", tmp_path / "v2"
    assert main(["verify", "--report", str(out / "report.json"), "--out", str(first)]) == 0
    assert main(["verify", "--report", str(out / "report.json"), "--out", str(second)]) == 0
    assert (first / "verify.json").read_bytes() == (second / "verify.json").read_bytes()

    # a t = 2 fiber push leaves the Pohozaev set
    u, s = io.read_agf1(out / report["files"]["u"])
    v, _ = io.read_agf1(out / report["files"]["v"])
    params = ModelParams(**{k: report["params"][k] for k in ("s", "p", "q", "r1", "r2", "mu1", "mu2", "beta", "a", "b")})
    pushed, _ = project_state(StatePair(u, v), params, t=2.0)
    io.write_agf1(tmp_path / "p_u.agf", pushed.u, s)
    io.write_agf1(tmp_path / "p_v.agf", pushed.v, s)
    pushed_out = tmp_path / "pushed"
    code = main(["verify", "--u", str(tmp_path / "p_u.agf"), "--v", str(tmp_path / "p_v.agf"), "--out", str(pushed_out)])
    assert code == 2
    checks = read(pushed_out / "verify.json")["checklist"]
    assert not checks["pohozaev"]["pass"]
    assert not checks["fiber_concavity"]["pass"]
