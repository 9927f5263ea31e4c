import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nehari import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = {
    "preset": "custom",
    "system": {"N": 3, "p": 4.0, "kappa": [1.0, 2.0], "mu": [1.0, 1.5],
               "lambda": [[0.0, -1.0], [-1.0, 0.0]]},
    "domain": {"kind": "ball", "radius": 1.0, "n": 201},
    "solver": {"tol_grad": 1e-7, "max_iter": 2000, "seed": 0, "armijo": {"c1": 1e-4}},
    "run": {"mode": "solve", "format": "both"},
}


def _write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def _invalid(tmp_path, capsys, data):
    code = cli.run("solve", _write_config(tmp_path, data), tmp_path / "out")
    return code, capsys.readouterr().err


class TestConfig:
    def test_roundtrip(self, tmp_path):
        cfg = cli.load_config(_write_config(tmp_path, SMALL))
        again = cli.RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg
        assert cfg.descent_config() == again.descent_config()

    def test_seed_override(self, tmp_path):
        cfg = cli.load_config(_write_config(tmp_path, SMALL))
        assert cfg.descent_config(5).rng_seed == 5 and cfg.descent_config().rng_seed == 0

    def test_asymmetric_lambda(self, tmp_path, capsys):
        bad = json.loads(json.dumps(SMALL))
        bad["system"]["lambda"] = [[0.0, -1.0], [-2.0, 0.0]]
        code, err = _invalid(tmp_path, capsys, bad)
        assert code == cli.EXIT_INVALID
        assert "config.system.lambda[0][1]" in err

    def test_schema_path(self, tmp_path, capsys):
        bad = json.loads(json.dumps(SMALL))
        bad["domain"]["n"] = "many"
        code, err = _invalid(tmp_path, capsys, bad)
        assert code == cli.EXIT_INVALID and "config.domain.n" in err

    def test_invalid_physics(self, tmp_path, capsys):
        bad = json.loads(json.dumps(SMALL))
        bad["system"]["lambda"] = [[0.0, 1.0], [1.0, 0.0]]
        code, _ = _invalid(tmp_path, capsys, bad)
        assert code == cli.EXIT_INVALID

    def test_unreadable(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{")
        assert cli.run("solve", path, tmp_path) == cli.EXIT_INVALID
        assert cli.run("solve", tmp_path / "missing.json", tmp_path) == cli.EXIT_INVALID


class TestOutput:
    def test_report_format(self):
        out = cli.emit_report({"b": 1.0, "a": [1, np.float64(0.5)], "c": float("nan")})
        assert out == b'{"a": [1, 5.000000000000e-01], "b": 1.000000000000e+00, "c": "nan"}\n'

    def test_profile_header(self):
        text = cli.emit_profile(np.linspace(0, 1, 3), np.ones((3, 3))).decode()
        lines = text.splitlines()
        assert lines[0] == "r,u1,u2,u3" and len(lines) == 4
        assert_allclose(np.loadtxt(text.splitlines()[1:], delimiter=","), [[0, 1, 1, 1],
                                                                         [0.5, 1, 1, 1],
                                                                         [1, 1, 1, 1]])


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("solve")
    code = cli.run("solve", _write_config(tmp, SMALL), tmp / "out")
    return code, tmp / "out"


class TestRun:
    def test_fields(self, solved):
        code, out = solved
        assert code == cli.EXIT_OK
        report = json.loads((out / "report.json").read_text())
        required = {"status", "energy", "psi", "s", "grad_norm", "component_norms",
                    "iterations", "preset", "grid_n", "residuals"}
        assert required <= set(report)
        assert report["status"] == "Converged" and report["grid_n"] == 201
        assert len(report["s"]) == 2

    def test_profile(self, solved):
        _, out = solved
        lines = (out / "profile_0.csv").read_text().splitlines()
        assert lines[0] == "r,u1,u2" and len(lines) == 202

    def test_deterministic(self, solved, tmp_path):
        _, out = solved
        cli.run("solve", _write_config(tmp_path, SMALL), tmp_path / "again")
        assert (tmp_path / "again" / "report.json").read_bytes() == (out / "report.json").read_bytes()

    def test_not_converged(self, tmp_path, capsys):
        cfg = json.loads(json.dumps(SMALL))
        cfg["solver"]["max_iter"] = 1
        assert cli.run("solve", _write_config(tmp_path, cfg), tmp_path) == cli.EXIT_NOT_CONVERGED

    def test_multistart(self, tmp_path):
        cfg = json.loads(json.dumps(SMALL))
        cfg["run"] = {"mode": "multistart", "k": 2, "format": "json"}
        assert cli.run("multistart", _write_config(tmp_path, cfg), tmp_path) == cli.EXIT_OK
        report = json.loads((tmp_path / "report.json").read_text())
        energies = [s["energy"] for s in report["solutions"]]
        assert energies == sorted(energies) and report["energy"] == energies[0]
        assert not list(tmp_path.glob("*.csv"))

    def test_verify_table(self, tmp_path, capsys):
        assert cli.main(["verify", "--out", str(tmp_path)]) == cli.EXIT_OK
        table = capsys.readouterr().out
        assert "checks passed" in table and "FAIL" not in table
        assert json.loads((tmp_path / "report.json").read_text())["passed"] is True

    def test_bubble_scan(self, tmp_path):
        cfg = {"preset": "custom",
               "system": {"N": 4, "p": 4.0, "kappa": [0.0], "mu": [1.0], "lambda": 0.0},
               "domain": {"kind": "ball", "n": 1001, "grading": 1000.0},
               "run": {"eps_list": [0.04, 0.02, 0.01], "betas": [1.2], "format": "json"}}
        assert cli.run("bubble-scan", _write_config(tmp_path, cfg), tmp_path) == cli.EXIT_OK
        report = json.loads((tmp_path / "report.json").read_text())
        assert set(report["fitted_slopes"]) >= {"grad_sq_defect", "l2", "beta_1.2", "l2_log"}


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nehari", "solve", "--config",
                           str(CONFIGS / "bn_pair.json"), "--out", str(tmp_path),
                           "--format", "json"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads((tmp_path / "report.json").read_text())["preset"] == "brezis_nirenberg"


def test_threads_argument():
    assert cli.main(["verify", "--threads", "0"]) == cli.EXIT_INVALID
