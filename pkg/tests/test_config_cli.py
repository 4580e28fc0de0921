import csv
import json

import numpy as np
import pytest

from schrobpx.cli import main
from schrobpx.config import (ConfigError, ProblemConfig, RunConfig, SchrodingerConfig, SolverConfig,
                             from_ini, to_ini)
from schrobpx.pipeline import DeskScaleError, run_level

SMALL = """
[problem]
dim = 2
J = 1
[solver]
eps = 1e-2
[schrodinger]
Np = auto
r = 2
"""


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.bc() == {"x0": "dirichlet", "x1": "neumann", "y0": "dirichlet", "y1": "dirichlet"}
    assert len(cfg.digest()) == 16


def test_ini_round_trip():
    cfg = RunConfig(problem=ProblemConfig(J=2, neumann=("x1", "y0")),
                    solver=SolverConfig(T=7.5, omega=0.8), schrodinger=SchrodingerConfig(Np=None, L=12.0),
                    seed=9)
    back = from_ini(to_ini(cfg))
    assert back == cfg and back.digest() == cfg.digest()


def test_ini_parsing():
    cfg = from_ini(SMALL)
    assert cfg.problem.J == 1 and cfg.schrodinger.Np is None and cfg.schrodinger.r == 2
    assert cfg.solver.T is None


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1", "[solver]\nfoo = 1", "[solver]\neps = 2", "[solver]\neps = abc",
    "[schrodinger]\nNp = 100", "[schrodinger]\nr = 0", "[problem]\ndim = 3",
    "[problem]\ndim = 1", "[solver]\npreconditioner = ilu", "[output]\nmatrices = maybe",
    "[run]\nlevel_min = 3\nlevel_max = 2", "not an ini",
])
def test_ini_errors(text):
    with pytest.raises(ConfigError):
        from_ini(text)


def _write(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return p


def test_cli_solve_outputs(tmp_path):
    cfg = _write(tmp_path, SMALL + "[output]\nmatrices = true\nstate = true\nshots = 2000\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["config_hash"] == from_ini((tmp_path / "run.ini").read_text()).digest()
    res = rep["result"]
    assert res["rel_error_vs_direct"] < 2e-2
    assert res["probabilities"]["P_z"] == pytest.approx(res["probabilities"]["P_z_chain"], rel=1e-12)
    assert res["sampling"]["shots"] == 2000
    for name in ("solution.csv", "state.csv", "A.mtx", "S.mtx", "mesh_vertices.csv", "mesh_cells.csv"):
        assert (tmp_path / "a" / name).exists()


def test_cli_deterministic(tmp_path):
    cfg = _write(tmp_path, SMALL + "[output]\nshots = 500\n")
    for d in ("a", "b"):
        assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / d), "--seed", "4"]) == 0
    for name in ("report.json", "solution.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, "[solver]\neps = 2\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["kind"] == "config" and err["exit_code"] == 2
    assert "eps" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "o")]) == 2


def test_cli_numeric_error(tmp_path):
    # a single-level 1D hierarchy with all-Neumann data leaves A singular
    cfg = _write(tmp_path, "[problem]\ndim = 1\nJ = 0\nsolution = sine\nneumann = x0,x1\n"
                           "[solver]\npreconditioner = none\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert json.loads((tmp_path / "o" / "error.json").read_text())["kind"] == "numerical"


def test_zero_solution_1d(tmp_path):
    cfg = _write(tmp_path, "[problem]\ndim = 1\nJ = 3\nsolution = zero\nneumann =\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "z")]) == 0
    res = json.loads((tmp_path / "z" / "report.json").read_text())["result"]
    assert res["errors"]["L2"] <= 1e-12 and res["errors"]["H1"] <= 1e-12
    assert res["probabilities"] is None


def test_desk_guard():
    cfg = RunConfig(problem=ProblemConfig(J=5))
    with pytest.raises(DeskScaleError):
        run_level(cfg)


def test_cli_desk_guard(tmp_path):
    cfg = _write(tmp_path, "[problem]\nJ = 5\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_cli_spectrum_and_resources(tmp_path):
    cfg = _write(tmp_path, "[run]\nlevel_min = 1\nlevel_max = 3\n[problem]\nJ = 2\n")
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    with open(tmp_path / "s" / "spectrum.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["level"]) for r in rows] == [1, 2, 3]
    kA = [float(r["kappa_A"]) for r in rows]
    assert np.all(np.diff(kA) > 0)
    assert main(["resources", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    led = json.loads((tmp_path / "r" / "resources.json").read_text())["ledger"]
    assert all(led["soundness"].values())
    bad = _write(tmp_path, "[solver]\npreconditioner = none\n")
    assert main(["resources", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2


def test_cli_convergence_small(tmp_path):
    cfg = _write(tmp_path, "[run]\nlevel_min = 1\nlevel_max = 2\n[solver]\neps = 1e-2\n"
                           "[schrodinger]\nNp = 256\n")
    assert main(["convergence", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 0
    with open(tmp_path / "c" / "convergence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and rows[1]["L2order"] != ""


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
