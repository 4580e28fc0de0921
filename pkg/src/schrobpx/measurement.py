"""Success probabilities, repetition counts and query-count estimates.

All asymptotic cost formulas are instantiated with unit constants; the numbers
are estimates meant for comparisons between configurations.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .schrodinger import RECOVERY_THRESHOLD, InitialProfile, WarpedGrid

WINDOW_HI = 1.5  # e^{p_k} <= e^{3/2}: the O(1) cutoff of the recovery index set


def recovery_window(grid: WarpedGrid, lo: float = RECOVERY_THRESHOLD, hi: float = WINDOW_HI) -> np.ndarray:
    p = grid.p
    return np.flatnonzero((p >= lo - 1e-12) & (p <= hi + 1e-12))


def profile_constants(profile: InitialProfile, grid: WarpedGrid,
                      threshold: float = RECOVERY_THRESHOLD) -> tuple[float, float]:
    """(C_e, C_e0): l2 mass of psi on all nodes and on nodes p_k >= threshold."""
    psi = profile(grid.p)
    keep = grid.p >= threshold - 1e-12
    return float(np.sqrt(np.sum(psi**2))), float(np.sqrt(np.sum(psi[keep] ** 2)))


@dataclass(frozen=True)
class ProbabilityReport:
    C_e: float
    C_e0: float
    Pr0: float
    Pr_star: float  # C_e0^2 ||z_f(T)||^2 / ||v_h(T)||^2
    Pr_star_window: float  # measured mass of the rows with p_k in the recovery window
    P_z: float
    P_z_chain: float  # Pr0 * Pr_star * ||z||^2 / ||z_f||^2
    P_u: float
    g: int
    recovery_set: tuple[int, ...]
    window_hi: float = WINDOW_HI

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recovery_set"] = [int(k) for k in self.recovery_set]
        return d


def success_probabilities(v_T: np.ndarray, z_f0: np.ndarray, z_fT: np.ndarray, u_T: np.ndarray,
                          gamma: float, profile: InitialProfile, grid: WarpedGrid) -> ProbabilityReport:
    """Measurement probabilities of one completed evolve/recover run.

    ``v_T`` has shape (Np, 2N'); ``z_fT`` is the recovered augmented vector whose
    first half is z(T).
    """
    nv, nz0, nzf = (float(np.linalg.norm(x)) for x in (v_T, z_f0, z_fT))
    if min(nv, nz0, nzf) == 0.0:
        raise ValueError("zero-norm state: probabilities undefined")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    z = z_fT[: len(z_fT) // 2]
    C_e, C_e0 = profile_constants(profile, grid)
    window = recovery_window(grid)
    Pr0 = nv**2 / (C_e**2 * nz0**2)
    Pr_star = C_e0**2 * nzf**2 / nv**2
    Pr_win = float(np.sum(np.abs(v_T[window]) ** 2)) / nv**2
    ratio = (C_e0 / C_e) ** 2
    P_z = ratio * float(z @ z) / nz0**2
    P_z_chain = Pr0 * Pr_star * float(z @ z) / nzf**2
    P_u = ratio * float(u_T @ u_T) / (nz0**2 * gamma**2)
    g = int(np.ceil(1.0 / np.sqrt(P_u))) if P_u > 0 else np.iinfo(np.int64).max
    return ProbabilityReport(C_e, C_e0, Pr0, Pr_star, Pr_win, P_z, P_z_chain, P_u, g,
                             tuple(int(k) for k in window))


@dataclass(frozen=True)
class RepetitionEstimate:
    measured: int  # ceil(1 / sqrt(P_u))
    bound: float  # C_gamma kappa / sqrt(lambda_max) log(1/eps), unit constant
    ratio: float
    exceeds_bound: bool


def repetition_estimate(report: ProbabilityReport, kappa: float, lambda_max: float,
                        C_gamma: float, eps: float) -> RepetitionEstimate:
    if min(kappa, lambda_max, C_gamma) <= 0 or not 0 < eps < 1:
        raise ValueError("inputs must be positive and eps in (0, 1)")
    bound = C_gamma * kappa / np.sqrt(lambda_max) * np.log(1 / eps)
    return RepetitionEstimate(report.g, float(bound), float(report.g / bound), bool(report.g > bound))


@dataclass(frozen=True)
class QueryCostReport:
    evolution_queries: float
    state_prep_queries: float
    per_run_queries: float
    kappa: float
    lambda_min: float
    lambda_max: float
    C_gamma: float
    nu_max: float
    alpha_f: float
    eps: float
    r: int
    eta0: float | None = None
    delta: float | None = None
    label: str = "estimate (unit O-constants)"


def query_complexity(kappa: float, lambda_min: float, lambda_max: float, C_gamma: float,
                     nu_max: float, eps: float, r: int, eta0: float | None = None,
                     delta: float | None = None) -> QueryCostReport:
    """Unit-constant instantiation of the oracle query counts.

    evolution:   C_g^3 kappa^2 / (lambda_max^{3/2} eps^{1/r}) log^2(1/eps)
    state prep:  C_g kappa log(1/eps)
    per run:     alpha_f nu_max / lambda_min log(1/eps) + log(eta0/delta), alpha_f = C_g^2
    """
    if min(kappa, lambda_min, lambda_max, C_gamma, nu_max) <= 0:
        raise ValueError("spectral data and constants must be positive")
    if not 0 < eps < 1 or r < 1:
        raise ValueError("need 0 < eps < 1 and r >= 1")
    log_e = np.log(1 / eps)
    alpha_f = C_gamma**2
    evo = C_gamma**3 * kappa**2 / (lambda_max**1.5 * eps ** (1 / r)) * log_e**2
    prep = C_gamma * kappa * log_e
    tail = np.log(eta0 / delta) if eta0 and delta else 0.0
    per_run = alpha_f * nu_max / lambda_min * log_e + max(tail, 0.0)
    return QueryCostReport(float(evo), float(prep), float(per_run), kappa, lambda_min, lambda_max,
                           C_gamma, nu_max, alpha_f, eps, r, eta0, delta)


def error_budget(v0: np.ndarray, u_T: np.ndarray, S, eps: float) -> tuple[float, float]:
    """(eta0, delta) with eta0 = ||v_h(0)|| and delta = (eps/6) ||u(T)|| ||S^+||.

    ||S^+|| = 1 / sigma_min(S) over the nonzero singular values (dense SVD).
    """
    Sd = S.toarray() if hasattr(S, "toarray") else np.asarray(S)
    sv = np.linalg.svd(Sd, compute_uv=False)
    sv = sv[sv > 1e-12 * sv[0]]
    return float(np.linalg.norm(v0)), float(eps / 6 * np.linalg.norm(u_T) / sv[-1])


@dataclass(frozen=True)
class SampleResult:
    counts: np.ndarray  # outcomes per grid row
    Pr_star_hat: float
    Pr_star_exact: float
    sigma: float
    chi2_pvalue: float


def sample_rows(v_T: np.ndarray, grid: WarpedGrid, shots: int, seed: int = 0) -> SampleResult:
    """Emulate computational-basis measurement of the p-register."""
    w = np.sum(np.abs(v_T) ** 2, axis=1)
    w = w / w.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, w)
    window = recovery_window(grid)
    exact = float(w[window].sum())
    hat = counts[window].sum() / shots
    sigma = float(np.sqrt(exact * (1 - exact) / shots))
    return SampleResult(counts, float(hat), exact, sigma, chi2_consistency(counts, w))


def chi2_consistency(counts: np.ndarray, weights: np.ndarray, min_expected: float = 5.0) -> float:
    """Pearson chi-square p-value; rows with small expected counts are pooled."""
    n = counts.sum()
    expected = n * weights
    big = expected >= min_expected
    obs = list(counts[big])
    exp_ = list(expected[big])
    if (~big).any():
        obs.append(counts[~big].sum())
        exp_.append(expected[~big].sum())
    obs, exp_ = np.asarray(obs, float), np.asarray(exp_, float)
    exp_ *= obs.sum() / exp_.sum()
    return float(stats.chisquare(obs, exp_).pvalue)
