"""Stationary iterations x <- x + B(b - Ax) and their continuous-time view.

The ODE du/dt = -BAu + Bb has the linear-system solution as its steady state;
the factored form dz/dt = -S^T A S z + S^T b with u = Sz is what gets
Schrödingerized downstream.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .bpx import FactoredPreconditioner

Operator = Callable[[np.ndarray], np.ndarray]


def _matvec(M) -> Operator:
    if callable(M):
        return M
    return lambda x: M @ x


@dataclass(frozen=True)
class Iterator:
    """The iterator B of a stationary method, held as its action on vectors."""

    kind: str
    apply: Operator
    n: int
    omega: float = 1.0
    apply_T: Operator | None = None  # action of B^T; None means B is symmetric
    factor: FactoredPreconditioner | None = None

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return self.apply(r)

    def transpose(self, r: np.ndarray) -> np.ndarray:
        return self.apply(r) if self.apply_T is None else self.apply_T(r)

    def dense(self) -> np.ndarray:
        return np.column_stack([self.apply(e) for e in np.eye(self.n)])


def richardson(n: int, omega: float) -> Iterator:
    if omega <= 0:
        raise ValueError("damping must be positive")
    return Iterator("richardson", lambda r: omega * r, n, omega)


def jacobi(A, omega: float = 1.0) -> Iterator:
    d = A.diagonal() if sp.issparse(A) else np.diag(A)
    inv = omega / d
    return Iterator("jacobi", lambda r: inv * r if r.ndim == 1 else inv[:, None] * r, len(d), omega)


def bpx(fp: FactoredPreconditioner, omega: float = 1.0) -> Iterator:
    if omega == 1.0:
        return Iterator("bpx", fp.apply_B, fp.N, 1.0, factor=fp)
    return Iterator("bpx", lambda r: omega * fp.apply_B(r), fp.N, omega)


def custom(B) -> Iterator:
    """Iterator from an explicit (possibly nonsymmetric) matrix."""
    B = B if sp.issparse(B) else np.asarray(B, dtype=float)
    dense = B.toarray() if sp.issparse(B) else B
    sym = np.array_equal(dense, dense.T)
    return Iterator("custom", _matvec(B), B.shape[0], apply_T=None if sym else _matvec(B.T))


def from_factor(fp: FactoredPreconditioner) -> Iterator:
    return Iterator("custom-S", fp.apply_B, fp.N, factor=fp)


def scaled(it: Iterator, omega: float) -> Iterator:
    """Replace B by omega * B."""
    tr = None if it.apply_T is None else (lambda r: omega * it.apply_T(r))
    return replace(it, apply=lambda r: omega * it.apply(r), apply_T=tr, omega=it.omega * omega, factor=None)


def iterate(A, b: np.ndarray, it: Iterator, x0: np.ndarray, steps: int) -> np.ndarray:
    if steps < 0:
        raise ValueError("steps must be >= 0")
    x = np.array(x0, dtype=float, copy=True)
    for _ in range(steps):
        x = x + it(b - A @ x)
    return x


def symmetrize(it: Iterator, A) -> Iterator:
    """B + B^T - B^T A B, the iterator of one forward plus one transposed sweep."""
    def apply(r):
        Br = it(r)
        return Br + it.transpose(r) - it.transpose(A @ Br)
    return Iterator(f"sym-{it.kind}", apply, it.n, it.omega)


def error_operator_apply(A, it: Iterator, x: np.ndarray) -> np.ndarray:
    """(I - BA) x."""
    return x - it(A @ x)


def _dense_BA(A, it: Iterator) -> np.ndarray:
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    return np.column_stack([it(col) for col in Ad.T])


def converges(A, it: Iterator) -> tuple[bool, float]:
    """Spectral radius of I - BA and whether it is below 1 (with a 1e-12 margin)."""
    E = np.eye(it.n) - _dense_BA(A, it)
    rho = float(np.max(np.abs(np.linalg.eigvals(E))))
    return rho < 1 - 1e-12, rho


def decay_bound(A, it: Iterator, t: float) -> float:
    """kappa(W) exp(-lambda_min(BA) t), W the eigenvector matrix of BA."""
    BA = _dense_BA(A, it)
    if np.allclose(BA, BA.T, rtol=0, atol=1e-12 * np.abs(BA).max()):
        lam, W = np.linalg.eigh(0.5 * (BA + BA.T))
    else:
        lam, W = np.linalg.eig(BA)
        if np.max(np.abs(lam.imag)) > 1e-10 * np.max(np.abs(lam)):
            raise ValueError("BA has complex eigenvalues")
        lam, W = lam.real, W.real
    resid = np.linalg.norm(BA @ W - W * lam) / np.linalg.norm(BA)
    if resid > 1e-8:
        raise ValueError(f"eigendecomposition of BA failed (residual {resid:.2e})")
    return float(np.linalg.cond(W) * np.exp(-lam.min() * t))


def stopping_time(lambda_min: float, eps: float) -> float:
    """Evolution time log(1/eps) / lambda_min."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if lambda_min <= 0:
        raise ValueError("lambda_min must be positive")
    return float(np.log(1 / eps) / lambda_min)


def ode_rhs(A, b: np.ndarray, it: Iterator) -> Operator:
    """Right-hand side of du/dt = -BAu + Bb, evaluated as B(b - Au)."""
    return lambda u: it(b - A @ u)


def integrate(rhs: Operator, y0: np.ndarray, t: float, rtol: float = 1e-10, atol: float = 1e-14) -> np.ndarray:
    """Reference solution of y' = rhs(y) at time t (adaptive explicit Runge-Kutta)."""
    sol = solve_ivp(lambda _, y: rhs(y), (0.0, t), np.asarray(y0, dtype=float),
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y[:, -1]


def integrate_preconditioned(A, b, it: Iterator, t: float, u0=None, **kw) -> np.ndarray:
    u0 = np.zeros(len(b)) if u0 is None else u0
    return integrate(ode_rhs(A, b, it), u0, t, **kw)


def integrate_factored(A, b, fp: FactoredPreconditioner, t: float, **kw) -> np.ndarray:
    """z(t) for dz/dt = -S^T A S z + S^T b, z(0) = 0."""
    bS = fp.apply_St(b)
    return integrate(lambda z: bS - fp.apply_St(A @ fp.apply_S(z)), np.zeros(fp.n_prime), t, **kw)
