"""Nested simplicial meshes of the unit interval and unit square.

Level ``j + 1`` is the red refinement of level ``j``: every edge is bisected.
Vertices of every level are numbered in row-major coordinate order, and each
fine vertex records its two coarse parents (equal for inherited vertices),
which is all the prolongation operators need.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FACES = {1: ("x0", "x1"), 2: ("x0", "x1", "y0", "y1")}

_TOL = 1e-12


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (n_vertices, d)
    cells: np.ndarray  # (n_cells, d + 1), counter-clockwise in 2D
    h: float
    parents: np.ndarray | None = None  # (n_vertices, 2) indices into the coarser level

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs, shape (n_edges, 2)."""
        if self.dim == 1:
            e = np.sort(self.cells, axis=1)
        else:
            c = self.cells
            e = np.vstack([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]])
            e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def vertex_degree(self) -> np.ndarray:
        e = self.edges()
        return np.bincount(e.ravel(), minlength=self.n_vertices)

    def face_of_vertex(self) -> dict[str, np.ndarray]:
        """Boolean masks of vertices lying on each face of the unit cube."""
        x = self.vertices
        out = {"x0": np.abs(x[:, 0]) < _TOL, "x1": np.abs(x[:, 0] - 1) < _TOL}
        if self.dim == 2:
            out["y0"] = np.abs(x[:, 1]) < _TOL
            out["y1"] = np.abs(x[:, 1] - 1) < _TOL
        return out

    def boundary_facets(self) -> tuple[np.ndarray, list[str]]:
        """Boundary facets (vertex index arrays) with the face each lies on."""
        on_face = self.face_of_vertex()
        if self.dim == 1:
            facets, names = [], []
            for name in FACES[1]:
                idx = np.flatnonzero(on_face[name])
                facets.extend([[i] for i in idx])
                names.extend([name] * len(idx))
            return np.array(facets, dtype=int), names
        c = self.cells
        e = np.sort(np.vstack([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        bnd = uniq[counts == 1]
        names = []
        for a, b in bnd:
            name = next((f for f in FACES[2] if on_face[f][a] and on_face[f][b]), None)
            if name is None:
                raise ValueError(f"boundary edge ({a}, {b}) is not on the unit square boundary")
            names.append(name)
        return bnd, names


@dataclass(frozen=True)
class MeshHierarchy:
    dim: int
    levels: list[Mesh] = field(default_factory=list)

    @property
    def J(self) -> int:
        return len(self.levels) - 1

    @property
    def h0(self) -> float:
        return self.levels[0].h

    @property
    def h(self) -> np.ndarray:
        return np.array([m.h for m in self.levels])

    def __getitem__(self, j: int) -> Mesh:
        return self.levels[j]


def unit_mesh(d: int, divisions: int) -> Mesh:
    """Uniform mesh of (0,1)^d; squares are cut along the (+1, +1) diagonal."""
    if d not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {d}")
    if divisions < 1:
        raise ValueError("initial_divisions must be >= 1")
    n = divisions
    h = 1.0 / n
    if d == 1:
        verts = np.linspace(0.0, 1.0, n + 1)[:, None]
        cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        return Mesh(verts, cells, h)
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    sw = (j * (n + 1) + i).ravel()
    se, nw = sw + 1, sw + n + 1
    ne = nw + 1
    cells = np.vstack([np.column_stack([sw, se, ne]), np.column_stack([sw, ne, nw])])
    return Mesh(verts, cells, h)


def refine(mesh: Mesh) -> Mesh:
    """Red refinement; coarse vertices keep their indices."""
    nv = mesh.n_vertices
    edges = mesh.edges()
    # midpoint of edge k gets vertex index nv + k
    lookup = {(int(a), int(b)): nv + k for k, (a, b) in enumerate(edges)}
    mid_xyz = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    verts = np.vstack([mesh.vertices, mid_xyz])
    parents = np.vstack([np.column_stack([np.arange(nv), np.arange(nv)]), edges])

    def mid(a, b):
        return np.array([lookup[(min(x, y), max(x, y))] for x, y in zip(a, b)])

    c = mesh.cells
    if mesh.dim == 1:
        m = mid(c[:, 0], c[:, 1])
        cells = np.vstack([np.column_stack([c[:, 0], m]), np.column_stack([m, c[:, 1]])])
    else:
        a, b, cc = c[:, 0], c[:, 1], c[:, 2]
        mab, mbc, mca = mid(a, b), mid(b, cc), mid(cc, a)
        cells = np.vstack([
            np.column_stack([a, mab, mca]),
            np.column_stack([mab, b, mbc]),
            np.column_stack([mca, mbc, cc]),
            np.column_stack([mab, mbc, mca]),
        ])
    # renumber in row-major coordinate order (y slowest) so operators are banded
    order = np.lexsort(verts.T)
    new_index = np.empty_like(order)
    new_index[order] = np.arange(len(order))
    return Mesh(verts[order], new_index[cells], mesh.h / 2, parents[order])


def build_hierarchy(d: int, initial_divisions: int = 2, J: int = 0) -> MeshHierarchy:
    if J < 0:
        raise ValueError("J must be >= 0")
    levels = [unit_mesh(d, initial_divisions)]
    for _ in range(J):
        levels.append(refine(levels[-1]))
    return MeshHierarchy(d, levels)


def check_nested(coarse: Mesh, fine: Mesh) -> None:
    """Raise unless ``fine`` is a refinement of ``coarse`` with recorded parents."""
    if fine.parents is None or fine.dim != coarse.dim:
        raise ValueError("fine mesh carries no parent map for this coarse mesh")
    p = fine.parents
    if p.min() < 0 or p.max() >= coarse.n_vertices:
        raise ValueError("parent indices out of range of the coarse mesh")
    guess = 0.5 * (coarse.vertices[p[:, 0]] + coarse.vertices[p[:, 1]])
    if not np.allclose(guess, fine.vertices, atol=1e-12):
        raise ValueError("meshes are not nested: fine vertices are not coarse edge midpoints")
