import json
from pathlib import Path

import pytest

from pathint.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_integrator_suite(tmp_path):
    assert _run(tmp_path, "integrator-suite", "--only", "gamma,dirac") == 0
    report = json.loads((tmp_path / "integrator_suite.json").read_text())
    assert report["checks"] and all(c["passed"] for c in report["checks"])
    assert json.loads((tmp_path / "manifest.json").read_text())["command"] == "integrator-suite"


def test_injected_fault_fails(tmp_path):
    assert _run(tmp_path, "integrator-suite", "--only", "hermite", "--inject-fault") == 1


def test_solve_writes_outputs(tmp_path):
    cfg = CONFIGS / "interval_poisson.json"
    assert _run(tmp_path, "solve", "--config", str(cfg), "--points", "0,0.5", "--samples", "500", "--workers", "1") == 0
    rows = (tmp_path / "solution.csv").read_text().splitlines()
    assert len(rows) == 3
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 0 and "problem_hash" in manifest


def test_exit_profile_and_mode_override(tmp_path):
    cfg = CONFIGS / "interval_poisson.json"
    code = _run(tmp_path, "exit-profile", "--config", str(cfg), "--mode", "critical", "--points", "linspace:0.1:0.9:3")
    assert code == 0
    assert len((tmp_path / "exit_profile.csv").read_text().splitlines()) == 4


def test_eigen(tmp_path):
    assert _run(tmp_path, "eigen", "--nodes", "32", "--k", "2") == 0
    vals = json.loads((tmp_path / "eigen.json").read_text())["eigenvalues"]
    assert vals[0] == pytest.approx(4.9348, rel=0.01)


@pytest.mark.parametrize(
    "args",
    [
        ["solve", "--points", "0.5"],
        ["solve", "--config", "missing.json", "--points", "0.5"],
        ["solve", "--config", str(CONFIGS / "interval_poisson.json"), "--points", "2.0"],
        ["eigen", "--nodes", "8"],
        ["integrator-suite", "--only", "lattice"],
    ],
)
def test_usage_errors_exit_2(tmp_path, args, capsys):
    assert _run(tmp_path, *args) == 2
    assert "pathint: error" in capsys.readouterr().err


def test_bad_seed_rejected(tmp_path):
    with pytest.raises(SystemExit) as info:
        _run(tmp_path, "solve", "--points", "0.5", "--seed", "-1")
    assert info.value.code == 2
