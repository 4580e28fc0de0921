"""P1 Lagrange assembly for -Δu = f with mixed Dirichlet/Neumann data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import FACES, Mesh

Field = Callable[[np.ndarray], np.ndarray]

_NORMALS = {
    "x0": np.array([-1.0, 0.0]),
    "x1": np.array([1.0, 0.0]),
    "y0": np.array([0.0, -1.0]),
    "y1": np.array([0.0, 1.0]),
}

# 3-point rule, exact for quadratics on triangles (barycentric points, equal weights)
_TRI_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_TRI_W = np.full(3, 1 / 3)
# 2-point Gauss on [0, 1]
_G = 0.5 / np.sqrt(3.0)
_LINE_T = np.array([0.5 - _G, 0.5 + _G])
_LINE_W = np.array([0.5, 0.5])


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact solution with its gradient and source; fields take points of shape (n, d)."""

    name: str
    dim: int
    u: Field
    grad: Field  # returns (n, d)
    f: Field

    def g_dirichlet(self, x: np.ndarray) -> np.ndarray:
        return self.u(x)

    def g_neumann(self, x: np.ndarray, face: str) -> np.ndarray:
        n = _NORMALS[face][: self.dim]
        return self.grad(x) @ n


def _trig_log_u(x):
    X, Y = x[:, 0], x[:, 1]
    return np.sin(2 * X + 0.5) * np.cos(Y + 0.3) + np.log1p(X * Y)


def _trig_log_grad(x):
    X, Y = x[:, 0], x[:, 1]
    ux = 2 * np.cos(2 * X + 0.5) * np.cos(Y + 0.3) + Y / (1 + X * Y)
    uy = -np.sin(2 * X + 0.5) * np.sin(Y + 0.3) + X / (1 + X * Y)
    return np.column_stack([ux, uy])


def _trig_log_f(x):
    X, Y = x[:, 0], x[:, 1]
    return 5 * np.sin(2 * X + 0.5) * np.cos(Y + 0.3) + (X**2 + Y**2) / (1 + X * Y) ** 2


def _zero(d):
    return ManufacturedSolution(
        "zero", d,
        u=lambda x: np.zeros(len(x)),
        grad=lambda x: np.zeros((len(x), d)),
        f=lambda x: np.zeros(len(x)),
    )


def _linear(d):
    coef = np.array([2.0, -3.0])[:d]
    return ManufacturedSolution(
        "linear", d,
        u=lambda x: 1.0 + x @ coef,
        grad=lambda x: np.tile(coef, (len(x), 1)),
        f=lambda x: np.zeros(len(x)),
    )


def manufactured(name: str, d: int = 2) -> ManufacturedSolution:
    """Look up a manufactured solution by id (``trig_log``, ``zero``, ``linear``, ``sine``)."""
    if name == "trig_log":
        if d != 2:
            raise ValueError("the 'trig_log' solution is two-dimensional")
        return ManufacturedSolution("trig_log", 2, _trig_log_u, _trig_log_grad, _trig_log_f)
    if name == "zero":
        return _zero(d)
    if name == "linear":
        return _linear(d)
    if name == "sine":
        if d == 1:
            return ManufacturedSolution(
                "sine", 1,
                u=lambda x: np.sin(np.pi * x[:, 0]),
                grad=lambda x: (np.pi * np.cos(np.pi * x[:, 0]))[:, None],
                f=lambda x: np.pi**2 * np.sin(np.pi * x[:, 0]),
            )
        return ManufacturedSolution(
            "sine", 2,
            u=lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]),
            grad=lambda x: np.pi * np.column_stack([
                np.cos(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]),
                np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]),
            ]),
            f=lambda x: 2 * np.pi**2 * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]),
        )
    raise ValueError(f"unknown manufactured solution {name!r}")


def default_bc(d: int) -> dict[str, str]:
    """Neumann on the open face x = 1 in 2D, Dirichlet elsewhere (corners included)."""
    if d == 1:
        return {"x0": "dirichlet", "x1": "dirichlet"}
    return {"x0": "dirichlet", "x1": "neumann", "y0": "dirichlet", "y1": "dirichlet"}


def _check_bc(d: int, bc: dict[str, str]) -> None:
    for face in FACES[d]:
        kind = bc.get(face)
        if kind not in ("dirichlet", "neumann"):
            raise ValueError(f"boundary face {face!r} is untagged or has unknown kind {kind!r}")


def dirichlet_mask(mesh: Mesh, bc: dict[str, str]) -> np.ndarray:
    _check_bc(mesh.dim, bc)
    on = mesh.face_of_vertex()
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    for face, kind in bc.items():
        if kind == "dirichlet":
            mask |= on[face]
    return mask


def free_dofs(mesh: Mesh, bc: dict[str, str]) -> np.ndarray:
    """Interior and Neumann vertices, in increasing vertex order."""
    return np.flatnonzero(~dirichlet_mask(mesh, bc))


@dataclass(frozen=True)
class AssembledProblem:
    A: sp.csr_matrix
    b: np.ndarray
    M: sp.csr_matrix
    free: np.ndarray
    dirichlet: np.ndarray
    g_D: np.ndarray
    n_vertices: int

    @property
    def N(self) -> int:
        return len(self.free)

    def lift(self, x_free: np.ndarray) -> np.ndarray:
        """Full nodal vector: free values plus Dirichlet data."""
        out = np.zeros(self.n_vertices)
        out[self.free] = x_free
        out[self.dirichlet] = self.g_D
        return out


def _geometry(mesh: Mesh):
    """Per-cell measure and gradients of the barycentric basis, shape (m, d+1, d)."""
    P = mesh.vertices[mesh.cells]
    if mesh.dim == 1:
        length = P[:, 1, 0] - P[:, 0, 0]
        with np.errstate(divide="ignore"):
            grads = np.stack([-1.0 / length, 1.0 / length], axis=1)[:, :, None]
        return length, grads
    Jac = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # columns are edges
    det = Jac[:, 0, 0] * Jac[:, 1, 1] - Jac[:, 0, 1] * Jac[:, 1, 0]
    area = 0.5 * det
    inv = np.empty_like(Jac)
    with np.errstate(divide="ignore", invalid="ignore"):  # degenerate cells are rejected by callers
        inv[:, 0, 0], inv[:, 1, 1] = Jac[:, 1, 1] / det, Jac[:, 0, 0] / det
        inv[:, 0, 1], inv[:, 1, 0] = -Jac[:, 0, 1] / det, -Jac[:, 1, 0] / det
        g0 = -(inv[:, 0] + inv[:, 1])
    g12 = inv  # rows: grad lambda_1, grad lambda_2
    grads = np.stack([g0, g12[:, 0], g12[:, 1]], axis=1)
    return area, grads


def _quad_points(mesh: Mesh):
    """Quadrature points (m, q, d), weights (m, q) and basis values (q, d+1)."""
    P = mesh.vertices[mesh.cells]
    measure, _ = _geometry(mesh)
    if mesh.dim == 1:
        phi = np.column_stack([1 - _LINE_T, _LINE_T])
        w = _LINE_W
    else:
        phi, w = _TRI_BARY, _TRI_W
    pts = np.einsum("qk,mkd->mqd", phi, P)
    return pts, measure[:, None] * w[None, :], phi


def assemble(problem: ManufacturedSolution, mesh: Mesh, bc: dict[str, str] | None = None) -> AssembledProblem:
    """Stiffness, mass and load on the free dofs with Dirichlet lifting."""
    if problem.dim != mesh.dim:
        raise ValueError("problem and mesh dimensions differ")
    bc = default_bc(mesh.dim) if bc is None else bc
    _check_bc(mesh.dim, bc)
    measure, grads = _geometry(mesh)
    if np.any(np.abs(measure) < 1e-14):
        raise ValueError("mesh contains zero-measure cells")
    if np.any(measure < 0):
        raise ValueError("mesh contains inverted cells")

    nv, c = mesh.n_vertices, mesh.cells
    k = c.shape[1]
    Kloc = measure[:, None, None] * np.einsum("mid,mjd->mij", grads, grads)
    if mesh.dim == 1:
        ref_mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        ref_mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Mloc = measure[:, None, None] * ref_mass[None]
    rows = np.repeat(c, k, axis=1).ravel()
    cols = np.tile(c, (1, k)).ravel()
    K = sp.coo_matrix((Kloc.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    M = sp.coo_matrix((Mloc.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()

    pts, wts, phi = _quad_points(mesh)
    fq = problem.f(pts.reshape(-1, mesh.dim)).reshape(wts.shape)
    F = np.bincount(c.ravel(), weights=np.einsum("mq,qk->mk", fq * wts, phi).ravel(), minlength=nv)

    facets, names = mesh.boundary_facets()
    for facet, face in zip(facets, names):
        if bc[face] != "neumann":
            continue
        if mesh.dim == 1:
            x = mesh.vertices[facet]
            F[facet[0]] += problem.g_neumann(x, face)[0]
            continue
        a, b = mesh.vertices[facet[0]], mesh.vertices[facet[1]]
        length = np.linalg.norm(b - a)
        x = a[None, :] + _LINE_T[:, None] * (b - a)[None, :]
        g = problem.g_neumann(x, face) * _LINE_W * length
        F[facet[0]] += g @ (1 - _LINE_T)
        F[facet[1]] += g @ _LINE_T

    dmask = dirichlet_mask(mesh, bc)
    free, dir_idx = np.flatnonzero(~dmask), np.flatnonzero(dmask)
    g_D = problem.g_dirichlet(mesh.vertices[dir_idx]) if len(dir_idx) else np.zeros(0)
    A = K[free][:, free].tocsr()
    b = F[free] - K[free][:, dir_idx] @ g_D
    return AssembledProblem(A, b, M[free][:, free].tocsr(), free, dir_idx, g_D, nv)


def interpolate(exact: ManufacturedSolution, mesh: Mesh) -> np.ndarray:
    return exact.u(mesh.vertices)


def error_norms(u_h: np.ndarray, exact: ManufacturedSolution, mesh: Mesh) -> dict[str, float]:
    """L2, H1-seminorm and full H1 errors of a nodal P1 function (all vertices)."""
    if u_h.shape != (mesh.n_vertices,):
        raise ValueError(f"u_h must have one value per vertex ({mesh.n_vertices}), got {u_h.shape}")
    _, grads = _geometry(mesh)
    pts, wts, phi = _quad_points(mesh)
    flat = pts.reshape(-1, mesh.dim)
    uh_q = np.einsum("qk,mk->mq", phi, u_h[mesh.cells])
    e0 = uh_q - exact.u(flat).reshape(wts.shape)
    guh = np.einsum("mkd,mk->md", grads, u_h[mesh.cells])
    ge = guh[:, None, :] - exact.grad(flat).reshape(wts.shape + (mesh.dim,))
    l2 = float(np.sqrt(np.sum(wts * e0**2)))
    semi = float(np.sqrt(np.sum(wts * np.sum(ge**2, axis=2))))
    return {"L2": l2, "H1": float(np.hypot(l2, semi)), "H1_semi": semi}
