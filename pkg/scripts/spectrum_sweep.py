"""kappa(A) against kappa(BA) across levels, for each preconditioner."""
import argparse
from dataclasses import replace
from pathlib import Path

from schrobpx.cli import SPECTRUM_COLUMNS
from schrobpx.config import ProblemConfig, RunConfig, SolverConfig
from schrobpx.pipeline import spectrum_table
from schrobpx.reports import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--levels", type=int, nargs=2, default=(1, 4), metavar=("MIN", "MAX"))
    ap.add_argument("--out", type=Path, default=Path("results/spectrum"))
    args = ap.parse_args()
    problem = ProblemConfig() if args.dim == 2 else ProblemConfig(dim=1, solution="sine", neumann=())
    levels = range(args.levels[0], args.levels[1] + 1)
    for pc in ("bpx", "jacobi", "none"):
        cfg = replace(RunConfig(problem=problem), solver=SolverConfig(preconditioner=pc)).validate()
        rows = spectrum_table(cfg, levels)
        write_csv(rows, args.out / f"spectrum_d{args.dim}_{pc}.csv", SPECTRUM_COLUMNS)
        print(pc, " ".join(f"J={r['level']}: kA={r['kappa_A']:.1f} kBA={r['kappa_BA']:.2f}" for r in rows))


if __name__ == "__main__":
    main()
