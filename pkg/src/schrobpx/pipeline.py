"""End-to-end run: assemble, precondition, Schrödingerize, evolve, recover, report."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as sla

from .bpx import (FactoredPreconditioner, ProlongationLadder, Spectrum, bpx_preconditioner,
                  build_ladder, diagonal_preconditioner, identity_preconditioner,
                  preconditioned_spectrum, spd_spectrum)
from .config import RunConfig
from .fem import AssembledProblem, assemble, error_norms, manufactured
from .ledger import bpx_ledger
from .measurement import (ProbabilityReport, QueryCostReport, error_budget, query_complexity,
                          repetition_estimate, sample_rows, success_probabilities)
from .mesh import Mesh, build_hierarchy
from .schrodinger import (AugmentedSystem, WarpedGrid, build_augmented, build_profile,
                          choose_domain, evolve, flatness, initial_state, recover)
from .stationary import stopping_time

DESK_LIMIT = 4000  # largest 2N' the harness runs without --override-scale


class DeskScaleError(RuntimeError):
    pass


def make_factor(cfg: RunConfig, hierarchy, problem: AssembledProblem,
                ladder: ProlongationLadder | None = None) -> FactoredPreconditioner:
    """Factor S with B = S S^T for the configured iterator (omega folded into S)."""
    kind, omega = cfg.solver.preconditioner, cfg.solver.omega
    N = problem.N
    if kind == "bpx":
        fp = bpx_preconditioner(hierarchy, cfg.bc(), ladder)
        if omega != 1.0:
            fp = FactoredPreconditioner(fp.P, fp.scale * np.sqrt(omega), fp.h, fp.d)
        return fp
    if kind == "jacobi":
        return diagonal_preconditioner(omega / problem.A.diagonal())
    if kind == "richardson":
        return diagonal_preconditioner(np.full(N, omega))
    return identity_preconditioner(N)


def factor_gamma(fp: FactoredPreconditioner, ledger=None) -> float:
    """Encoding constant of S: amplified ledger value for BPX, max entry for one diagonal block."""
    if ledger is not None:
        return ledger.gamma_amplified
    return float(abs(fp.S).max())


@dataclass
class LevelResult:
    J: int
    h: float
    N: int
    n_prime: int
    T: float
    spectrum_A: Spectrum
    spectrum_BA: Spectrum
    grid: WarpedGrid
    errors: dict[str, float]
    rel_error_direct: float
    norm_drift: float
    flatness: float
    imag_residual: float
    probabilities: ProbabilityReport
    costs: QueryCostReport
    repetitions: dict
    gamma: float
    C_gamma: float
    u_full: np.ndarray
    x_direct: np.ndarray
    mesh: Mesh = field(repr=False)
    v_T: np.ndarray | None = field(default=None, repr=False)
    system: AugmentedSystem | None = field(default=None, repr=False)
    ledger: dict | None = None
    sampling: dict | None = None

    def summary(self) -> dict:
        return {
            "J": self.J, "h": self.h, "N": self.N, "N_prime": self.n_prime, "T": self.T,
            "kappa_A": self.spectrum_A.kappa, "kappa_BA": self.spectrum_BA.kappa,
            "lambda_min_BA": self.spectrum_BA.lambda_min, "lambda_max_BA": self.spectrum_BA.lambda_max,
            "spectrum_method": self.spectrum_BA.method,
            "grid": {"L": self.grid.L, "R": self.grid.R, "Np": self.grid.Np, "dp": self.grid.dp,
                     "nu_max": self.grid.nu_max},
            "errors": self.errors, "rel_error_vs_direct": self.rel_error_direct,
            "norm_drift": self.norm_drift, "flatness": self.flatness,
            "imag_residual": self.imag_residual,
            "gamma": self.gamma, "C_gamma": self.C_gamma,
            "probabilities": None if self.probabilities is None else self.probabilities.to_dict(),
            "repetitions": self.repetitions,
            "query_costs": None if self.costs is None else dict(vars(self.costs)),
            "ledger": self.ledger, "sampling": self.sampling,
        }


def run_level(cfg: RunConfig, J: int | None = None, override_scale: bool = False,
              keep_state: bool = False) -> LevelResult:
    cfg = cfg if J is None else cfg.with_level(J)
    p, s, q = cfg.problem, cfg.solver, cfg.schrodinger
    exact = manufactured(p.solution, p.dim)
    hierarchy = build_hierarchy(p.dim, p.initial_divisions, p.J)
    mesh = hierarchy[p.J]
    prob = assemble(exact, mesh, cfg.bc())
    ladder = build_ladder(hierarchy, cfg.bc()) if s.preconditioner == "bpx" else None
    fp = make_factor(cfg, hierarchy, prob, ladder)

    n_dim = 2 * (fp.N * len(fp.P) if q.embedded else fp.n_prime)
    if n_dim > DESK_LIMIT and not override_scale:
        raise DeskScaleError(f"2N' = {n_dim} exceeds the desk-scale limit {DESK_LIMIT}; "
                             "pass --override-scale to run anyway")

    spec_A = spd_spectrum(prob.A)
    spec_BA = preconditioned_spectrum(prob.A, fp)
    T = s.T if s.T is not None else stopping_time(spec_BA.lambda_min, s.eps)
    system = build_augmented(prob.A, fp, prob.b, T, embedded=q.embedded)
    grid = choose_domain(system, s.eps, q.margin, q.r, q.Np)
    if q.L is not None or q.R is not None:
        grid = WarpedGrid(q.L if q.L is not None else grid.L, q.R if q.R is not None else grid.R, grid.Np)
    profile = build_profile(q.r)
    v = evolve(system, grid, profile, q.path)
    v0_norm = float(np.linalg.norm(initial_state(system, grid, profile)))
    drift = abs(float(np.linalg.norm(v)) - v0_norm) / v0_norm if v0_norm else 0.0
    rec = recover(v, grid, system)

    x = sla.spsolve(prob.A.tocsc(), prob.b) if prob.N else np.zeros(0)
    xn = np.linalg.norm(x)
    rel = float(np.linalg.norm(rec.u - x) / xn) if xn > 0 else float(np.linalg.norm(rec.u))
    u_full = prob.lift(rec.u)
    errs = error_norms(u_full, exact, mesh)

    ledger = None
    if ladder is not None and s.omega == 1.0:
        n_T = int(max(m.vertex_degree().max() for m in hierarchy.levels)) + 1
        ledger = bpx_ledger(ladder, fp, prob.A, n_T)
    gamma = factor_gamma(fp, ledger)
    C_gamma = gamma * np.sqrt(spec_A.lambda_max)

    flat = flatness(v, grid) if np.linalg.norm(system.z_f0) > 0 else 0.0
    probs = costs = reps = None
    if np.linalg.norm(system.z_f0) > 0 and np.linalg.norm(rec.u) > 0:
        probs = success_probabilities(v, system.z_f0, rec.z_f, rec.u, gamma, profile, grid)
        eta0, delta = error_budget(initial_state(system, grid, profile), rec.u, system.S, s.eps)
        costs = query_complexity(spec_BA.kappa, spec_BA.lambda_min, spec_BA.lambda_max, C_gamma,
                                 grid.nu_max, s.eps, q.r, eta0, delta)
        rep = repetition_estimate(probs, spec_BA.kappa, spec_BA.lambda_max, C_gamma, s.eps)
        reps = {"g_measured": rep.measured, "g_bound": rep.bound, "ratio": rep.ratio,
                "exceeds_bound": rep.exceeds_bound}
    sampling = None
    if cfg.output.shots > 0 and probs is not None:
        smp = sample_rows(v, grid, cfg.output.shots, cfg.seed)
        sampling = {"shots": cfg.output.shots, "Pr_star_hat": smp.Pr_star_hat,
                    "Pr_star_exact": smp.Pr_star_exact, "sigma": smp.sigma,
                    "chi2_pvalue": smp.chi2_pvalue}

    return LevelResult(
        p.J, mesh.h, prob.N, system.n_prime, T, spec_A, spec_BA, grid, errs, rel, drift, flat,
        rec.imag_residual, probs, costs, reps, gamma, float(C_gamma), u_full, x, mesh,
        v if keep_state else None, system if keep_state else None,
        None if ledger is None else {k: v_ for k, v_ in ledger.to_dict().items() if k != "trace"},
        sampling,
    )


def observed_orders(h: np.ndarray, err: np.ndarray) -> np.ndarray:
    """log2 ratios of successive errors (NaN for the first level)."""
    h, err = np.asarray(h, float), np.asarray(err, float)
    out = np.full(len(err), np.nan)
    out[1:] = np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])
    return out


def convergence_table(cfg: RunConfig, levels=None, override_scale: bool = False) -> list[dict]:
    """One row per level; failures are recorded and the sweep continues."""
    levels = range(cfg.level_min, cfg.level_max + 1) if levels is None else levels
    rows = []
    for J in levels:
        try:
            res = run_level(cfg, J, override_scale)
        except Exception as exc:  # noqa: BLE001 - reported per level
            rows.append({"level": J, "error": f"{type(exc).__name__}: {exc}"})
            continue
        rows.append({
            "level": J, "h": res.h, "N": res.N, "kappa_A": res.spectrum_A.kappa,
            "kappa_BA": res.spectrum_BA.kappa, "L2err": res.errors["L2"], "H1err": res.errors["H1"],
            "g_measured": res.repetitions["g_measured"] if res.repetitions else None,
            "rel_error_vs_direct": res.rel_error_direct, "T": res.T, "Np": res.grid.Np,
        })
    ok = [r for r in rows if "error" not in r]
    if ok:
        h = np.array([r["h"] for r in ok])
        for key, col in (("L2err", "L2order"), ("H1err", "H1order")):
            orders = observed_orders(h, np.array([r[key] for r in ok]))
            for r, o in zip(ok, orders):
                r[col] = None if np.isnan(o) else float(o)
    return rows


def spectrum_table(cfg: RunConfig, levels=None) -> list[dict]:
    levels = range(cfg.level_min, cfg.level_max + 1) if levels is None else levels
    rows = []
    for J in levels:
        c = cfg.with_level(J)
        H = build_hierarchy(c.problem.dim, c.problem.initial_divisions, J)
        prob = assemble(manufactured(c.problem.solution, c.problem.dim), H[J], c.bc())
        fp = make_factor(c, H, prob)
        sA, sBA = spd_spectrum(prob.A), preconditioned_spectrum(prob.A, fp)
        rows.append({"level": J, "N": prob.N, "kappa_A": sA.kappa, "kappa_BA": sBA.kappa,
                     "lambda_min": sBA.lambda_min, "lambda_max": sBA.lambda_max, "method": sBA.method})
    return rows


def ledger_report(cfg: RunConfig, J: int | None = None) -> dict:
    c = cfg if J is None else cfg.with_level(J)
    p = c.problem
    H = build_hierarchy(p.dim, p.initial_divisions, p.J)
    prob = assemble(manufactured(p.solution, p.dim), H[p.J], c.bc())
    ladder = build_ladder(H, c.bc())
    fp = bpx_preconditioner(H, c.bc(), ladder)
    n_T = int(max(m.vertex_degree().max() for m in H.levels)) + 1
    out = bpx_ledger(ladder, fp, prob.A, n_T).to_dict()
    out["column_sparsity"] = ladder.column_sparsity()
    out["max_edges"] = [int(m.vertex_degree().max()) for m in H.levels]
    out["S_norm"] = float(np.linalg.norm(fp.S.toarray(), 2))
    return out
