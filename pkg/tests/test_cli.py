import json
import subprocess
import sys

import numpy as np
import pytest

from lipapprox.cli import main
from lipapprox.io import read_field


def run(args, tmp):
    return main([*args, "--out", str(tmp)])


def test_examples_case2(tmp_path):
    assert run(["examples", "--case", "2", "--n", "2001"], tmp_path) == 0
    for name in ("u.csv", "f.csv", "regions.json", "residuals.json", "reference.csv"):
        assert (tmp_path / name).exists()
    u = read_field(tmp_path / "u.csv")
    assert np.max(np.abs(u.values - (np.abs(u.x) + 0.5))) <= 2 * u.grid.h[0]
    res = json.loads((tmp_path / "residuals.json").read_text())
    assert res["boundary"]["passed"]
    assert res["provenance"]["command"][:3] == ["lipapprox", "examples", "--case"]


def test_plap_sweep(tmp_path):
    assert run(["plap-sweep", "--case", "2", "--n", "201", "--ps", "4,8,16,32,64"], tmp_path) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("# ")
    dist = [float(ln.split(",")[1]) for ln in lines[2:]]
    assert len(dist) == 5 and all(b < a for a, b in zip(dist, dist[1:]))


def test_sbv1d(tmp_path):
    assert run(["sbv1d", "--case", "1", "--k", "3.5", "--r0", "0.5", "--n", "401"], tmp_path) == 0
    d = json.loads((tmp_path / "jumps.json").read_text())
    assert d["njumps"] == 2


def test_project_envelope_verify(tmp_path):
    assert run(["project", "--case", "3", "--n", "401"], tmp_path / "p") == 0
    assert json.loads((tmp_path / "p" / "certificate.json").read_text())["converged"]
    assert run(["envelope", "--case", "2", "--n", "101"], tmp_path / "e") == 0
    up = read_field(tmp_path / "e" / "upper.csv")
    assert np.max(np.abs(up.values - (1 + np.abs(up.x)))) <= 0.04
    assert run(["verify", "--case", "radial", "--n", "31", "--format", "json"], tmp_path / "v") == 0
    assert read_field(tmp_path / "v" / "u.json").grid.dim == 2


def test_input_file_datum(tmp_path):
    assert run(["examples", "--case", "3", "--n", "101"], tmp_path / "a") == 0
    assert run(["project", "--input", str(tmp_path / "a" / "f.csv")], tmp_path / "b") == 0
    u1 = read_field(tmp_path / "a" / "u.csv")
    u2 = read_field(tmp_path / "b" / "u.csv")
    assert np.array_equal(u1.values, u2.values)


def test_usage_errors_exit_1(tmp_path, capsys):
    assert run(["project", "--n", "11"], tmp_path) == 1
    assert run(["project", "--case", "7"], tmp_path) == 1
    assert run(["sbv1d", "--case", "radial", "--n", "21"], tmp_path) == 1
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["project", "--n", "abc"])
    assert exc.value.code == 1


def test_non_convergence_exit_2(tmp_path):
    assert run(["project", "--case", "radial", "--n", "21", "--max-iter", "2"], tmp_path) == 2
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["converged"] is False
    assert (tmp_path / "u.csv").exists()


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "lipapprox", "project", "--case", "2", "--n", "51", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "u.csv").exists()
