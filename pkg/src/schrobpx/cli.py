"""Command-line front end.

    schrobpx solve|convergence|spectrum|resources [--config PATH] [--out DIR]
                                                  [--seed INT] [--override-scale]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load
from .pipeline import (DeskScaleError, convergence_table, ledger_report, run_level,
                       spectrum_table)
from .reports import dumps, state_rows, write_csv, write_json, write_matrix, write_mesh

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

CONVERGENCE_COLUMNS = ["level", "h", "N", "kappa_A", "kappa_BA", "L2err", "H1err",
                       "L2order", "H1order", "g_measured", "rel_error_vs_direct", "T", "Np", "error"]
SPECTRUM_COLUMNS = ["level", "N", "kappa_A", "kappa_BA", "lambda_min", "lambda_max", "method"]


def _envelope(cfg: RunConfig, command: str, body: dict) -> dict:
    return {"command": command, "version": __version__, "config": cfg.to_dict(),
            "config_hash": cfg.digest(), **body}


def cmd_solve(cfg: RunConfig, out: Path, override: bool) -> dict:
    res = run_level(cfg, override_scale=override, keep_state=cfg.output.state)
    report = _envelope(cfg, "solve", {"result": res.summary()})
    write_json(report, out / "report.json")
    mesh = res.mesh
    rows = [{"vertex": i, **{c: float(x) for c, x in zip("xy", mesh.vertices[i])}, "u_h": float(u)}
            for i, u in enumerate(res.u_full)]
    write_csv(rows, out / "solution.csv")
    if cfg.output.state and res.v_T is not None:
        write_csv(state_rows(res.v_T, res.grid), out / "state.csv")
    if cfg.output.matrices and res.system is not None:
        write_matrix(res.system.A, out / "A.mtx")
        write_matrix(res.system.S, out / "S.mtx")
        write_mesh(mesh, out / "mesh")
    return report


def cmd_convergence(cfg: RunConfig, out: Path, override: bool) -> dict:
    rows = convergence_table(cfg, override_scale=override)
    write_csv(rows, out / "convergence.csv", CONVERGENCE_COLUMNS)
    report = _envelope(cfg, "convergence", {"rows": rows})
    write_json(report, out / "convergence.json")
    return report


def cmd_spectrum(cfg: RunConfig, out: Path, override: bool) -> dict:
    rows = spectrum_table(cfg)
    write_csv(rows, out / "spectrum.csv", SPECTRUM_COLUMNS)
    report = _envelope(cfg, "spectrum", {"rows": rows})
    write_json(report, out / "spectrum.json")
    return report


def cmd_resources(cfg: RunConfig, out: Path, override: bool) -> dict:
    if cfg.solver.preconditioner != "bpx":
        raise ConfigError("resources reports the BPX factor; set solver.preconditioner = bpx")
    led = ledger_report(cfg)
    table = [{"level": j, "gamma_j": g, "sparsity": led["sparsity"][j] if j < len(led["sparsity"]) else None,
              "amplification_cost": led["amplification_cost"][j]}
             for j, g in enumerate(led["gamma_j"])]
    write_csv(table, out / "resources.csv")
    report = _envelope(cfg, "resources", {"ledger": led})
    write_json(report, out / "resources.json")
    return report


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence,
            "spectrum": cmd_spectrum, "resources": cmd_resources}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="schrobpx", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI file; defaults are used when omitted")
        p.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="RNG seed for measurement sampling")
        p.add_argument("--override-scale", action="store_true",
                       help="run above the desk-scale limit 2N' > 4000")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        cfg = load(args.config) if args.config else RunConfig().validate()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        out = Path(cfg.output.directory) if out is None else out
        out.mkdir(parents=True, exist_ok=True)
        report = COMMANDS[args.command](cfg, out, args.override_scale)
    except (ConfigError, DeskScaleError) as exc:
        return _fail(out, args.command, "config", exc, EXIT_CONFIG)
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        return _fail(out, args.command, "numerical", exc, EXIT_NUMERIC)
    sys.stdout.write(f"{args.command}: wrote {out} (config {report['config_hash']})\n")
    return EXIT_OK


def _fail(out: Path | None, command: str, kind: str, exc: Exception, code: int) -> int:
    err = {"command": command, "status": "error", "kind": kind,
           "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    text = dumps(err)
    if out is not None:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text)
        except OSError:
            pass
    sys.stderr.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
