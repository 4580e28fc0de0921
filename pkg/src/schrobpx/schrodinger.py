"""Warped-phase (Schrödingerized) evolution of the factored steady-state ODE.

The homogeneous system d z_f/dt = A_f z_f, with

    A_f = [[-A_S, I/T], [0, 0]],   z_f(0) = [0; T b_S],   A_S = S^T A S,

is lifted to v(t, p) = e^{-p} z_f(t) and evolved as the Hamiltonian system
dv/dt = -H_1 dv/dp + i H_2 v on a periodic p-grid. Each Fourier mode nu
evolves independently under exp(-i (nu H_1 - H_2) t).

Fourier transforms are unitary. The stored state therefore has the same
2-norm as the grid samples psi(p_k) z_f(0) it starts from.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .bpx import FactoredPreconditioner

RECOVERY_THRESHOLD = 0.5  # p at and beyond which e^p v(T, p) = z_f(T)
DENSE_MODE_LIMIT = 512  # per-mode dense eigendecomposition up to this dimension
MODAL_LIMIT = 4000  # one dense eigendecomposition of A_S up to this N'


@dataclass
class AugmentedSystem:
    A: sp.csr_matrix
    S: sp.csr_matrix  # (N, N'), compact or zero-padded embedded layout
    b: np.ndarray
    T: float
    embedded: bool = False
    fp: FactoredPreconditioner | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.S.shape[0]

    @property
    def n_prime(self) -> int:
        return self.S.shape[1]

    @property
    def dim(self) -> int:
        return 2 * self.n_prime

    def apply_AS(self, z: np.ndarray) -> np.ndarray:
        return self.S.T @ (self.A @ (self.S @ z))

    @cached_property
    def b_S(self) -> np.ndarray:
        return self.S.T @ self.b

    @cached_property
    def z_f0(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.n_prime), self.T * self.b_S])

    @cached_property
    def A_S(self) -> sp.csr_matrix:
        return (self.S.T @ self.A @ self.S).tocsr()

    def A_S_operator(self) -> sla.LinearOperator:
        n = self.n_prime
        return sla.LinearOperator((n, n), matvec=self.apply_AS, dtype=float)

    def apply_Af(self, zf: np.ndarray) -> np.ndarray:
        n = self.n_prime
        top = -self.apply_AS(zf[:n]) + zf[n:] / self.T
        return np.concatenate([top, np.zeros(n, dtype=top.dtype)])

    def _blocks(self, a11, a12, a21) -> sp.csr_matrix:
        n = self.n_prime
        I = sp.identity(n, format="csr")
        return sp.bmat([[a11, a12 * I], [a21 * I, sp.csr_matrix((n, n))]], format="csr")

    def A_f(self) -> sp.csr_matrix:
        return self._blocks(-self.A_S, 1 / self.T, 0.0)

    def H1(self) -> sp.csr_matrix:
        """Hermitian part (A_f + A_f^T) / 2."""
        return self._blocks(-self.A_S, 0.5 / self.T, 0.5 / self.T)

    def H2_generator(self) -> sp.csr_matrix:
        """Real antisymmetric K = (A_f - A_f^T) / 2, so that H_2 = -iK."""
        return self._blocks(sp.csr_matrix((self.n_prime, self.n_prime)), 0.5 / self.T, -0.5 / self.T)

    def H2(self) -> sp.csr_matrix:
        return (-1j * self.H2_generator()).tocsr()

    def H_nu(self, nu: float) -> sp.csr_matrix:
        return (nu * self.H1() - self.H2()).tocsr()

    @cached_property
    def modal(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenpairs of A_S; they block-diagonalise H_1 and H_2 into 2x2 blocks."""
        K = self.A_S.toarray()
        lam, Q = np.linalg.eigh(0.5 * (K + K.T))
        return lam, Q

    def spectrum_bounds(self) -> tuple[float, float]:
        """(lambda_min, lambda_max) of A_S; dense when feasible, else Lanczos for the top."""
        if self.n_prime <= MODAL_LIMIT:
            lam = self.modal[0]
            return float(max(lam[0], 0.0)), float(lam[-1])
        top = sla.eigsh(self.A_S_operator(), k=1, which="LA", tol=1e-8, return_eigenvectors=False)[0]
        lo = 0.0 if self.n_prime > self.N else float(
            sla.eigsh(self.A_S_operator(), k=1, which="SA", tol=1e-8, return_eigenvectors=False)[0])
        return lo, float(top)

    def h1_extremes(self) -> tuple[float, float]:
        """(lambda^-_max, lambda^+_max) of H_1 from the 2x2 block structure."""
        lo, hi = self.spectrum_bounds()
        c = 1 / self.T**2
        return 0.5 * (hi + np.sqrt(hi**2 + c)), 0.5 * (-lo + np.sqrt(lo**2 + c))


def build_augmented(A, S, b: np.ndarray, T: float, embedded: bool = False) -> AugmentedSystem:
    """Augmented homogeneous system for factor S (matrix or FactoredPreconditioner)."""
    if T <= 0:
        raise ValueError("T must be positive")
    fp = S if isinstance(S, FactoredPreconditioner) else None
    if fp is not None:
        S = fp.S_embedded if embedded else fp.S
    S = sp.csr_matrix(S)
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape != (S.shape[0], S.shape[0]) or b.shape != (S.shape[0],):
        raise ValueError(f"dimension mismatch: A {A.shape}, S {S.shape}, b {b.shape}")
    return AugmentedSystem(A, S, b, float(T), embedded, fp)


@dataclass(frozen=True)
class WarpedGrid:
    L: float
    R: float
    Np: int

    def __post_init__(self):
        if self.L <= 0 or self.R <= 0:
            raise ValueError("domain bounds L and R must be positive")
        if self.Np < 2 or self.Np % 2:
            raise ValueError("Np must be a positive even integer")

    @property
    def dp(self) -> float:
        return (self.R + self.L) / self.Np

    @property
    def p(self) -> np.ndarray:
        return -self.L + self.dp * np.arange(self.Np)

    @property
    def nu(self) -> np.ndarray:
        return 2 * np.pi * (np.arange(self.Np) - self.Np // 2) / (self.R + self.L)

    @property
    def nu_max(self) -> float:
        return float(np.pi * self.Np / (self.R + self.L))

    def _sign(self, ndim: int) -> np.ndarray:
        s = (-1.0) ** np.arange(self.Np)
        return s.reshape((-1,) + (1,) * (ndim - 1))

    def to_fourier(self, v: np.ndarray) -> np.ndarray:
        """Coefficients on the basis exp(i nu_l (p + L)), unitary normalisation."""
        return np.fft.fft(self._sign(v.ndim) * v, axis=0, norm="ortho")

    def from_fourier(self, vt: np.ndarray) -> np.ndarray:
        return self._sign(vt.ndim) * np.fft.ifft(vt, axis=0, norm="ortho")

    def momentum_matrix(self) -> np.ndarray:
        """Dense matrix of -i d/dp on the grid (small grids only)."""
        eye = np.eye(self.Np)
        Phi_inv = self.to_fourier(eye)
        return self.from_fourier(self.nu[:, None] * Phi_inv)

    def recovery_index(self, threshold: float = RECOVERY_THRESHOLD) -> int:
        idx = np.flatnonzero(self.p >= threshold - 1e-12)
        if idx.size == 0:
            raise ValueError(f"no grid node with p >= {threshold}")
        return int(idx[0])


def choose_domain(sys: AugmentedSystem, eps: float, margin: float = 2.0, r: int = 1,
                  Np: int | None = None) -> WarpedGrid:
    """Truncated p-domain [-L, R] and grid size for target accuracy eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    lam_minus, _ = sys.h1_extremes()
    log_eps = np.log(1 / eps)
    R = 0.5 + log_eps + margin  # lambda^+_max(H_1) T <= 1/2
    L = lam_minus * sys.T + log_eps + margin
    if L <= 0 or R <= 0:
        raise ValueError(f"nonpositive domain bounds L={L}, R={R}")
    if Np is None:
        target = eps ** (1.0 / r)
        Np = 2 ** int(np.ceil(np.log2((L + R) / target)))
        Np = max(Np, 2)
    return WarpedGrid(float(L), float(R), int(Np))


@dataclass(frozen=True)
class InitialProfile:
    """psi(p) = e^{-p} for p >= 0 and sum_j c_j e^{jp} for p < 0."""

    r: int
    coeffs: np.ndarray

    def __call__(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        neg = np.minimum(p, 0.0)
        left = sum(c * np.exp((j + 1) * neg) for j, c in enumerate(self.coeffs))
        return np.where(p >= 0, np.exp(-np.maximum(p, 0.0)), left)


def build_profile(r: int = 1) -> InitialProfile:
    """Profile whose first r-1 derivatives match e^{-p} at p = 0.

    Solves sum_j c_j j^m = (-1)^m, m < r, exactly: c_j is the Lagrange basis
    polynomial on the nodes 1..r evaluated at -1.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if r > 12:
        raise ValueError("r > 12 is not supported (Vandermonde conditioning)")
    nodes = range(1, r + 1)
    coeffs = []
    for j in nodes:
        c = Fraction(1)
        for i in nodes:
            if i != j:
                c *= Fraction(-1 - i, j - i)
        coeffs.append(float(c))
    return InitialProfile(r, np.array(coeffs))


def initial_state(sys: AugmentedSystem, grid: WarpedGrid, profile: InitialProfile) -> np.ndarray:
    """v_h(0)[k, :] = psi(p_k) z_f(0)."""
    return np.outer(profile(grid.p), sys.z_f0).astype(complex)


def _modal_propagators(lam: np.ndarray, nu: np.ndarray, T: float):
    """Entries of exp(-i T [[-nu lam, a], [conj(a), 0]]), a = (nu + i)/(2T), on a (mode, eigen) grid."""
    a11 = -nu[:, None] * lam[None, :]
    a12 = np.broadcast_to(((nu + 1j) / (2 * T))[:, None], a11.shape)
    half = 0.5 * a11
    w = np.sqrt(half**2 + np.abs(a12) ** 2)
    phase = np.exp(-1j * half * T)
    c, s = np.cos(w * T), np.sin(w * T) / w
    E00 = phase * (c - 1j * s * half)
    E11 = phase * (c + 1j * s * half)
    E01 = phase * (-1j * s * a12)
    E10 = phase * (-1j * s * np.conj(a12))
    return E00, E01, E10, E11


def _evolve_modal(sys, grid, psi_t):
    lam, Q = sys.modal
    n = sys.n_prime
    zeta_top, zeta_bot = Q.T @ sys.z_f0[:n], Q.T @ sys.z_f0[n:]
    E00, E01, E10, E11 = _modal_propagators(lam, grid.nu, sys.T)
    top = psi_t[:, None] * (E00 * zeta_top + E01 * zeta_bot)
    bot = psi_t[:, None] * (E10 * zeta_top + E11 * zeta_bot)

    def back(X):  # X @ Q^T with complex X, real Q
        return (X.real @ Q.T) + 1j * (X.imag @ Q.T)

    return np.hstack([back(top), back(bot)])


def _evolve_per_mode(sys, grid, psi_t, path):
    z0 = sys.z_f0.astype(complex)
    out = np.empty((grid.Np, sys.dim), dtype=complex)
    if path == "dense":
        H1, H2 = sys.H1().toarray(), sys.H2().toarray()
        for k, nu in enumerate(grid.nu):
            mu, V = np.linalg.eigh(nu * H1 - H2)
            out[k] = psi_t[k] * (V @ (np.exp(-1j * mu * sys.T) * (V.conj().T @ z0)))
        return out
    H1, H2 = sys.H1().astype(complex), sys.H2()
    for k, nu in enumerate(grid.nu):
        Hk = (nu * H1 - H2).tocsc()
        out[k] = psi_t[k] * sla.expm_multiply(-1j * sys.T * Hk, z0)
    return out


def evolve(sys: AugmentedSystem, grid: WarpedGrid, profile: InitialProfile,
           path: str = "auto") -> np.ndarray:
    """State v_h(T), shape (Np, 2N'), rows indexed by the p-grid.

    ``path`` selects the per-mode propagator: ``modal`` (closed-form 2x2 blocks
    after one eigendecomposition of A_S), ``dense`` (eigendecomposition of each
    nu H_1 - H_2), ``krylov`` (action of the exponential on a vector) or
    ``auto`` (modal when N' <= MODAL_LIMIT, else krylov).
    """
    if path == "auto":
        path = "modal" if sys.n_prime <= MODAL_LIMIT else "krylov"
    if path not in ("modal", "dense", "krylov"):
        raise ValueError(f"unknown propagation path {path!r}")
    if path == "dense" and sys.dim > DENSE_MODE_LIMIT:
        raise ValueError(f"dense per-mode path limited to 2N' <= {DENSE_MODE_LIMIT}")
    psi_t = grid.to_fourier(profile(grid.p).astype(complex))
    # transform of the rank-one initial state is psi_t (x) z_f(0)
    vt = _evolve_modal(sys, grid, psi_t) if path == "modal" else _evolve_per_mode(sys, grid, psi_t, path)
    v = grid.from_fourier(vt)
    if not np.all(np.isfinite(v)):
        raise FloatingPointError("non-finite values in evolved state")
    return v


@dataclass(frozen=True)
class Recovery:
    u: np.ndarray
    k_star: int
    z_f: np.ndarray  # full recovered augmented vector
    imag_residual: float  # max |imag| of e^{p} v(T, p_k*), should be tiny

    @property
    def z(self) -> np.ndarray:
        return self.z_f[: len(self.z_f) // 2]


def recover(v: np.ndarray, grid: WarpedGrid, sys: AugmentedSystem,
            threshold: float = RECOVERY_THRESHOLD) -> Recovery:
    """u(T) = S z(T) read off the smallest grid node p_k >= threshold."""
    k = grid.recovery_index(threshold)
    zf = np.exp(grid.p[k]) * v[k]
    return Recovery(sys.S @ zf.real[: sys.n_prime], k, zf.real, float(np.max(np.abs(zf.imag))))


def recovered_rows(v: np.ndarray, grid: WarpedGrid, lo: float = 0.5, hi: float = 1.5) -> np.ndarray:
    """e^{p_k} v(T, p_k) for every node with lo <= p_k <= hi."""
    p = grid.p
    sel = (p >= lo - 1e-12) & (p <= hi + 1e-12)
    return np.exp(p[sel])[:, None] * v[sel]


def flatness(v: np.ndarray, grid: WarpedGrid, lo: float = 0.5, hi: float = 1.5) -> float:
    """Max relative deviation of the recovered rows from their mean over [lo, hi]."""
    rows = recovered_rows(v, grid, lo, hi)
    mean = rows.mean(axis=0)
    return float(np.max(np.linalg.norm(rows - mean, axis=1)) / np.linalg.norm(mean))


def exact_z(sys: AugmentedSystem, t: float | None = None) -> np.ndarray:
    """z(t) = int_0^t exp(-A_S s) ds b_S from the eigenpairs of A_S."""
    t = sys.T if t is None else t
    lam, Q = sys.modal
    safe = np.where(np.abs(lam) * t > 1e-12, lam, 1.0)
    weight = np.where(np.abs(lam) * t > 1e-12, -np.expm1(-lam * t) / safe, t)
    return Q @ (weight * (Q.T @ sys.b_S))
