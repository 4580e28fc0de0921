"""BPX multilevel preconditioner in factored form B = S S^T.

S = [S_0, ..., S_J] with S_j = h_j^{(2-d)/2} P_j, where P_j interpolates level-j
nodal values to the finest level. Everything acts on free (non-Dirichlet) dofs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import default_bc, free_dofs
from .mesh import Mesh, MeshHierarchy, check_nested


def two_level_prolongation(coarse: Mesh, fine: Mesh, bc: dict[str, str] | None = None) -> sp.csr_matrix:
    """Linear interpolation from coarse free dofs to fine free dofs."""
    check_nested(coarse, fine)
    bc = default_bc(coarse.dim) if bc is None else bc
    cfree, ffree = free_dofs(coarse, bc), free_dofs(fine, bc)
    col_of = np.full(coarse.n_vertices, -1)
    col_of[cfree] = np.arange(len(cfree))
    par = fine.parents[ffree]
    same = par[:, 0] == par[:, 1]
    rows, cols, vals = [], [], []
    for k in (0, 1):
        c = col_of[par[:, k]]
        keep = c >= 0
        if k == 1:
            keep &= ~same  # inherited vertices: a single unit entry
        w = np.where(same, 1.0, 0.5)
        rows.append(np.flatnonzero(keep))
        cols.append(c[keep])
        vals.append(w[keep])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(ffree), len(cfree)),
    )


@dataclass(frozen=True)
class ProlongationLadder:
    steps: list[sp.csr_matrix]  # steps[i] = P_i^{i+1}, shape (N_{i+1}, N_i)
    sizes: list[int]  # N_0, ..., N_J

    @property
    def J(self) -> int:
        return len(self.sizes) - 1

    def column_sparsity(self) -> list[int]:
        return [int(np.diff(P.tocsc().indptr).max()) for P in self.steps]

    def row_sparsity(self) -> list[int]:
        return [int(np.diff(P.indptr).max()) for P in self.steps]

    def sparsity(self) -> list[int]:
        """s_{i,i+1}: max nonzeros per row or column."""
        return [max(r, c) for r, c in zip(self.row_sparsity(), self.column_sparsity())]


def build_ladder(hierarchy: MeshHierarchy, bc: dict[str, str] | None = None) -> ProlongationLadder:
    bc = default_bc(hierarchy.dim) if bc is None else bc
    steps = [two_level_prolongation(hierarchy[i], hierarchy[i + 1], bc) for i in range(hierarchy.J)]
    sizes = [len(free_dofs(m, bc)) for m in hierarchy.levels]
    return ProlongationLadder(steps, sizes)


def compose_prolongation(ladder: ProlongationLadder, j: int) -> sp.csr_matrix:
    """P_j = P_{J-1}^J ... P_j^{j+1}; identity for j = J."""
    if not 0 <= j <= ladder.J:
        raise ValueError(f"level {j} outside 0..{ladder.J}")
    P = sp.identity(ladder.sizes[j], format="csr")
    for step in ladder.steps[j:]:
        P = (step @ P).tocsr()
    return P


@dataclass(frozen=True)
class FactoredPreconditioner:
    """B = sum_j scale_j^2 P_j P_j^T held through its blocks."""

    P: list[sp.csr_matrix]  # each (N, N_j)
    scale: np.ndarray  # h_j^{(2-d)/2} for BPX
    h: np.ndarray | None = None
    d: int | None = None

    @property
    def N(self) -> int:
        return self.P[0].shape[0]

    @property
    def sizes(self) -> list[int]:
        return [P.shape[1] for P in self.P]

    @property
    def n_prime(self) -> int:
        return sum(self.sizes)

    @property
    def blocks(self) -> list[sp.csr_matrix]:
        return [(s * P).tocsr() for s, P in zip(self.scale, self.P)]

    @property
    def S(self) -> sp.csr_matrix:
        return sp.hstack(self.blocks, format="csr")

    @property
    def S_embedded(self) -> sp.csr_matrix:
        """[S_{0,e}, ..., S_{J,e}], every block zero-padded to width N."""
        N = self.N
        padded = [sp.hstack([S, sp.csr_matrix((N, N - S.shape[1]))], format="csr") for S in self.blocks]
        return sp.hstack(padded, format="csr")

    def embed(self, z: np.ndarray) -> np.ndarray:
        """Map a compact coefficient vector (length N') to its embedded layout."""
        N, out, start = self.N, [], 0
        for n in self.sizes:
            block = np.zeros(N, dtype=z.dtype)
            block[:n] = z[start:start + n]
            out.append(block)
            start += n
        return np.concatenate(out)

    def compact(self, z_e: np.ndarray) -> np.ndarray:
        N = self.N
        return np.concatenate([z_e[j * N: j * N + n] for j, n in enumerate(self.sizes)])

    def apply_S(self, z: np.ndarray) -> np.ndarray:
        out, start = np.zeros(self.N, dtype=np.result_type(z, float)), 0
        for s, P in zip(self.scale, self.P):
            n = P.shape[1]
            out += s * (P @ z[start:start + n])
            start += n
        return out

    def apply_St(self, r: np.ndarray) -> np.ndarray:
        return np.concatenate([s * (P.T @ r) for s, P in zip(self.scale, self.P)])

    def apply_B(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r)
        if r.shape[0] != self.N:
            raise ValueError(f"vector length {r.shape[0]} does not match N = {self.N}")
        out = np.zeros(r.shape, dtype=np.result_type(r, float))
        for s, P in zip(self.scale, self.P):
            out += s**2 * (P @ (P.T @ r))
        return out

    def dense_B(self) -> np.ndarray:
        return sum(s**2 * (P @ P.T).toarray() for s, P in zip(self.scale, self.P))


def bpx_preconditioner(hierarchy: MeshHierarchy, bc: dict[str, str] | None = None,
                       ladder: ProlongationLadder | None = None) -> FactoredPreconditioner:
    ladder = build_ladder(hierarchy, bc) if ladder is None else ladder
    d, h = hierarchy.dim, hierarchy.h
    P = [compose_prolongation(ladder, j) for j in range(ladder.J + 1)]
    return FactoredPreconditioner(P, h ** ((2 - d) / 2), h, d)


def identity_preconditioner(n: int) -> FactoredPreconditioner:
    return FactoredPreconditioner([sp.identity(n, format="csr")], np.ones(1))


def diagonal_preconditioner(diag: np.ndarray) -> FactoredPreconditioner:
    """B = diag(diag) with S = diag(sqrt(diag)); covers Richardson and Jacobi."""
    diag = np.asarray(diag, dtype=float)
    if np.any(diag <= 0):
        raise ValueError("diagonal preconditioner needs positive entries")
    return FactoredPreconditioner([sp.diags(np.sqrt(diag), format="csr")], np.ones(1))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    lambda_min: float
    lambda_max: float
    method: str

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min


def spd_spectrum(A) -> Spectrum:
    """Dense spectrum of a symmetric positive definite matrix."""
    dense = A.toarray() if sp.issparse(A) else np.asarray(A)
    ev = np.linalg.eigvalsh(dense)
    return Spectrum(ev, float(ev[0]), float(ev[-1]), "dense")


def lanczos_extremes(apply_A, apply_B, n: int, tol: float = 1e-8, maxiter: int = 500,
                     seed: int = 0) -> tuple[float, float, int]:
    """Extreme eigenvalues of BA by Lanczos in the A inner product.

    BA is self-adjoint with respect to <x, y>_A, so this is the Lanczos process
    behind preconditioned CG. Full reorthogonalisation; stops when both extreme
    Ritz pairs have relative residual below ``tol``.
    """
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    Aq = apply_A(q)
    q, Aq = q / np.sqrt(q @ Aq), Aq / np.sqrt(q @ Aq)
    Q, AQ = [q], [Aq]
    alpha, beta = [], []
    maxiter = min(maxiter, n)
    for m in range(1, maxiter + 1):
        w = apply_B(AQ[-1])
        a = w @ AQ[-1]
        alpha.append(a)
        Qm, AQm = np.array(Q), np.array(AQ)
        for _ in range(2):  # classical Gram-Schmidt twice, A inner product
            w -= Qm.T @ (AQm @ w)
        Aw = apply_A(w)
        b = np.sqrt(max(w @ Aw, 0.0))
        T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
        theta, s = np.linalg.eigh(T)
        res = np.abs(b * s[-1, [0, -1]]) / np.abs(theta[[0, -1]])
        if np.all(res < tol) or m == maxiter or b < 1e-300:
            return float(theta[0]), float(theta[-1]), m
        beta.append(b)
        Q.append(w / b)
        AQ.append(Aw / b)
    raise RuntimeError("Lanczos did not run")  # pragma: no cover


def preconditioned_spectrum(A, fp: FactoredPreconditioner, tol: float = 1e-10,
                            dense_limit: int = 4000, lanczos_tol: float = 1e-8) -> Spectrum:
    """Nonzero spectrum of S^T A S, i.e. the spectrum of BA."""
    N = fp.N
    if fp.n_prime <= dense_limit:
        S = fp.S.toarray()
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
        K = S.T @ Ad @ S
        ev = np.linalg.eigvalsh(0.5 * (K + K.T))
        keep = ev[ev > tol * ev[-1]]
        if len(keep) != N:
            raise ValueError(f"{len(keep)} nonzero eigenvalues of S^T A S, expected N = {N}: S is rank deficient")
        return Spectrum(keep, float(keep[0]), float(keep[-1]), "dense")
    lo, hi, _ = lanczos_extremes(lambda x: A @ x, fp.apply_B, N, tol=lanczos_tol)
    return Spectrum(np.array([lo, hi]), lo, hi, "lanczos")
