"""Plain-text artifacts: JSON reports, CSV tables, MatrixMarket operators."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import Mesh
from .schrodinger import WarpedGrid


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_csv(rows: list[dict], path: str | Path, columns: list[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r.get(k)) for k in columns})
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return list(csv.DictReader(fh))


def write_matrix(M, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(path), sp.coo_matrix(M))
    return path.with_suffix(".mtx") if path.suffix != ".mtx" else path


def read_matrix(path: str | Path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))


def write_mesh(mesh: Mesh, prefix: str | Path) -> tuple[Path, Path]:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    vpath, cpath = Path(f"{prefix}_vertices.csv"), Path(f"{prefix}_cells.csv")
    names = ["x", "y"][: mesh.dim]
    np.savetxt(vpath, mesh.vertices, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
    cnames = [f"v{i}" for i in range(mesh.cells.shape[1])]
    np.savetxt(cpath, mesh.cells, delimiter=",", header=",".join(cnames), comments="", fmt="%d")
    return vpath, cpath


def state_rows(v: np.ndarray, grid: WarpedGrid) -> list[dict]:
    """One row per p-node: index, p_k and the norms of both halves of the row."""
    n = v.shape[1] // 2
    top, bot = np.linalg.norm(v[:, :n], axis=1), np.linalg.norm(v[:, n:], axis=1)
    return [{"k": k, "p": float(p), "norm_z": float(a), "norm_aux": float(b), "norm": float(np.hypot(a, b))}
            for k, (p, a, b) in enumerate(zip(grid.p, top, bot))]
