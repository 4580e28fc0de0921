"""Bookkeeping for block-encoding constants (alpha, ancillas, error).

Descriptors combine by the usual product/sum/scale rules; an optional numeric
matrix rides along so every constant can be checked against a dense norm.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bpx import FactoredPreconditioner, ProlongationLadder


def _next_pow2(s: int) -> int:
    return 1 if s <= 1 else 1 << (int(s) - 1).bit_length()


def _qubits(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 2))))


def _norm2(M) -> float:
    D = M.toarray() if sp.issparse(M) else np.asarray(M)
    return float(np.linalg.norm(D, 2)) if D.size else 0.0


@dataclass
class BlockEncodingDescriptor:
    alpha: float
    m: int
    eps: float
    n: int
    provenance: str
    detail: dict = field(default_factory=dict)
    children: list["BlockEncodingDescriptor"] = field(default_factory=list)
    matrix: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.alpha <= 0 or self.m < 0 or self.eps < 0:
            raise ValueError(f"invalid descriptor ({self.alpha}, {self.m}, {self.eps})")

    def sound(self, rtol: float = 1e-12) -> bool:
        """||matrix||_2 <= alpha + eps; True when no matrix is attached."""
        if self.matrix is None:
            return True
        return _norm2(self.matrix) <= (self.alpha + self.eps) * (1 + rtol)

    def to_dict(self) -> dict:
        out = {"kind": self.provenance, "alpha": self.alpha, "m": self.m, "eps": self.eps, "n": self.n}
        if self.detail:
            out["detail"] = self.detail
        if self.matrix is not None:
            out["norm"] = _norm2(self.matrix)
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def identity_descriptor(n: int) -> BlockEncodingDescriptor:
    return BlockEncodingDescriptor(1.0, 0, 0.0, n, "identity")


def from_sparse(s: int, n: int, max_entry: float = 1.0, matrix=None) -> BlockEncodingDescriptor:
    """(s, n+1, 0) encoding of an s-sparse matrix with entries bounded by 1.

    s is padded up to a power of two; the raw value is kept in ``detail``.
    """
    if max_entry > 1:
        raise ValueError("entries must be bounded by 1; rescale first")
    if s < 1:
        raise ValueError("sparsity must be >= 1")
    padded = _next_pow2(s)
    return BlockEncodingDescriptor(float(padded), n + 1, 0.0, n, "sparse",
                                   {"s_raw": int(s), "s_padded": padded}, matrix=matrix)


def encode_matrix(M) -> BlockEncodingDescriptor:
    """Sparse-access descriptor of a concrete matrix (sparsity = max row/column count)."""
    M = sp.csr_matrix(M)
    s = max(int(np.diff(M.indptr).max()), int(np.diff(M.tocsc().indptr).max()))
    return from_sparse(s, _qubits(max(M.shape)), float(abs(M).max()), matrix=M)


def _combine_matrix(a, b, op):
    if a.matrix is None or b.matrix is None:
        return None
    return op(a.matrix, b.matrix)


def product(a: BlockEncodingDescriptor, b: BlockEncodingDescriptor) -> BlockEncodingDescriptor:
    return BlockEncodingDescriptor(a.alpha * b.alpha, a.m + b.m, a.alpha * b.eps + b.alpha * a.eps,
                                   max(a.n, b.n), "product", children=[a, b],
                                   matrix=_combine_matrix(a, b, lambda x, y: x @ y))


def sum_(a: BlockEncodingDescriptor, b: BlockEncodingDescriptor) -> BlockEncodingDescriptor:
    return BlockEncodingDescriptor(a.alpha + b.alpha, a.m + b.m, a.alpha * b.eps + b.alpha * a.eps,
                                   max(a.n, b.n), "sum", children=[a, b],
                                   matrix=_combine_matrix(a, b, lambda x, y: x + y))


def scale(c: float, a: BlockEncodingDescriptor) -> BlockEncodingDescriptor:
    if c <= 0:
        raise ValueError("scale factor must be positive")
    mat = None if a.matrix is None else c * a.matrix
    return BlockEncodingDescriptor(c * a.alpha, a.m, c * a.eps, a.n, "scaled", {"c": c}, [a], mat)


def amplify(desc: BlockEncodingDescriptor, true_norm: float, delta: float = 0.5,
            eps: float = 1e-6) -> tuple[BlockEncodingDescriptor, int]:
    """Uniform singular value amplification: alpha -> ||A|| / (1 - delta)."""
    if true_norm > desc.alpha * (1 + 1e-12):
        raise ValueError("true norm exceeds the encoding constant")
    if not 0 < delta < 1 or not 0 < eps < 1:
        raise ValueError("delta and eps must lie in (0, 1)")
    cost = math.ceil(desc.alpha / (delta * true_norm) * math.log(desc.alpha / (true_norm * eps)))
    out = BlockEncodingDescriptor(true_norm / (1 - delta), desc.m + 1, eps * true_norm, desc.n,
                                  "amplified", {"delta": delta, "cost": cost, "true_norm": true_norm},
                                  [desc], desc.matrix)
    return out, cost


def composite_prolongation(ladder: ProlongationLadder, j: int) -> BlockEncodingDescriptor:
    """P_j as the product of encoded ladder steps P_{J-1}^J ... P_j^{j+1}."""
    desc = identity_descriptor(_qubits(ladder.sizes[-1]))
    desc.matrix = sp.identity(ladder.sizes[j], format="csr")
    for step in ladder.steps[j:]:
        desc = product(encode_matrix(step), desc)
    return desc


def scaled_prolongation_constant(j: int, d: int, h_j: float, sparsities) -> float:
    """gamma_j = h_j^{(2-d)/2} prod_{i=j}^{J-1} s_{i,i+1}."""
    return float(h_j ** ((2 - d) / 2) * np.prod(np.asarray(sparsities[j:], dtype=float)))


@dataclass
class GeneralizedDescriptor:
    gamma: float
    gammas: np.ndarray  # padded to 2^a entries
    m_in: int
    m_out: int
    n_blocks: int  # before padding
    matrix: object = field(default=None, repr=False)

    @property
    def amplitudes(self) -> np.ndarray:
        return self.gammas / self.gamma

    def sound(self, rtol: float = 1e-12) -> bool:
        return self.matrix is None or _norm2(self.matrix) <= self.gamma * (1 + rtol)

    def to_dict(self) -> dict:
        out = {"kind": "combined", "gamma": self.gamma, "gammas": self.gammas.tolist(),
               "m_in": self.m_in, "m_out": self.m_out, "n_blocks": self.n_blocks}
        if self.matrix is not None:
            out["norm"] = _norm2(self.matrix)
        return out


def combine_Se(gammas, block_width: int | None = None, matrix=None) -> GeneralizedDescriptor:
    """Encoding of the concatenation [S_0, ..., S_J]: gamma = sqrt(sum gamma_j^2)."""
    g = np.asarray(gammas, dtype=float)
    if g.ndim != 1 or g.size == 0 or np.any(g < 0):
        raise ValueError("gammas must be a nonempty list of nonnegative numbers")
    k = g.size
    padded = np.concatenate([g, np.zeros(_next_pow2(k) - k)])
    a = int(math.log2(padded.size))
    n = _qubits(block_width) if block_width else 0
    return GeneralizedDescriptor(float(np.sqrt(np.sum(g**2))), padded, n + a, n, k, matrix)


@dataclass(frozen=True)
class GammaBound:
    gamma_sq_bound: float
    C_gamma_bound: float
    G: float


def _geometric(G: float, terms: int) -> float:
    """sum_{i<terms} G^i, with the G = 1 limit."""
    if abs(G - 1) < 1e-14:
        return float(terms)
    return (1 - G**terms) / (1 - G)


def bpx_gamma_bound(d: int, J: int, n_T: int, h0: float, amplified: bool = False) -> GammaBound:
    """Unit-constant bounds on gamma^2 and C_gamma for BPX.

    gamma^2 <= sum_j h_j^{2-d} n_T^{2(J-j)} = h0^{2-d} n_T^{2J} (1 - G^{J+1}) / (1 - G),
    G = 2^{d-2} / n_T^2; after amplification n_T drops out and G = 2^{d-2}.
    """
    if n_T < 2:
        raise ValueError("n_T must be >= 2")
    if J < 0:
        raise ValueError("J must be >= 0")
    base = 1 if amplified else n_T
    G = 2.0 ** (d - 2) / base**2
    gamma_sq = h0 ** (2 - d) * float(base) ** (2 * J) * _geometric(G, J + 1)
    # (G - G^{-J}) / (G - 1) = sum_{i=0}^{J} G^{-i}
    C_sq = _geometric(1 / G, J + 1)
    return GammaBound(float(gamma_sq), float(np.sqrt(C_sq)), float(G))


@dataclass
class BPXLedger:
    d: int
    J: int
    n_T: int
    sparsities: list[int]
    sparsities_padded: list[int]
    gammas: np.ndarray
    combined: GeneralizedDescriptor
    prolongations: list[BlockEncodingDescriptor]
    amplified: list[BlockEncodingDescriptor]
    amplification_cost: list[int]
    C_gamma: float
    bound: GammaBound
    bound_amplified: GammaBound
    gamma_amplified: float
    C_gamma_amplified: float

    def soundness(self) -> dict[str, bool]:
        return {
            "prolongations": all(p.sound() for p in self.prolongations),
            "amplified": all(p.sound() for p in self.amplified),
            "combined": self.combined.sound(),
            "bound_dominates": self.bound.gamma_sq_bound >= float(np.sum(self.gammas**2)) * (1 - 1e-12),
        }

    def to_dict(self) -> dict:
        return {
            "d": self.d, "J": self.J, "n_T": self.n_T,
            "sparsity": self.sparsities, "sparsity_padded": self.sparsities_padded,
            "gamma_j": self.gammas.tolist(), "gamma": self.combined.gamma,
            "gamma_sq": float(np.sum(self.gammas**2)),
            "C_gamma": self.C_gamma,
            "gamma_sq_bound": self.bound.gamma_sq_bound, "C_gamma_bound": self.bound.C_gamma_bound,
            "G": self.bound.G,
            "gamma_amplified": self.gamma_amplified, "C_gamma_amplified": self.C_gamma_amplified,
            "C_gamma_bound_amplified": self.bound_amplified.C_gamma_bound,
            "G_amplified": self.bound_amplified.G,
            "amplification_cost": self.amplification_cost,
            "soundness": self.soundness(),
            "trace": {"combined": self.combined.to_dict(),
                      "prolongations": [p.to_dict() for p in self.prolongations],
                      "amplified": [p.to_dict() for p in self.amplified]},
        }


def bpx_ledger(ladder: ProlongationLadder, fp: FactoredPreconditioner, A, n_T: int,
               delta: float = 0.5, eps: float = 1e-6) -> BPXLedger:
    """Constants of the BPX factor S from its prolongation ladder.

    gamma_j uses raw ladder sparsities (the quantity the bound is stated in);
    the sparse descriptors themselves carry the power-of-two padding.
    """
    if fp.d is None or fp.h is None:
        raise ValueError("factored preconditioner carries no level data")
    d, h, J = fp.d, fp.h, ladder.J
    raw = ladder.sparsity()
    gammas = np.array([scaled_prolongation_constant(j, d, h[j], raw) for j in range(J + 1)])
    combined = combine_Se(gammas, fp.N, matrix=fp.S)
    prolong = [composite_prolongation(ladder, j) for j in range(J + 1)]
    amplified, costs = [], []
    for P in prolong:
        nrm = _norm2(P.matrix)
        a, c = amplify(P, nrm, delta, eps)
        amplified.append(a)
        costs.append(c)
    sqrtA = math.sqrt(_norm2(A))
    gam_amp = float(np.sqrt(sum(h[j] ** (2 - d) * amplified[j].alpha ** 2 for j in range(J + 1))))
    return BPXLedger(
        d, J, n_T, raw, [_next_pow2(s) for s in raw], gammas, combined, prolong, amplified, costs,
        combined.gamma * sqrtA, bpx_gamma_bound(d, J, n_T, h[0]),
        bpx_gamma_bound(d, J, n_T, h[0], amplified=True), gam_amp, gam_amp * sqrtA,
    )
