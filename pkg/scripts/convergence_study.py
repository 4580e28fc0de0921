"""Mesh-convergence sweeps: BPX at T=15 against B=I at T=15 and T=40.

    python scripts/convergence_study.py --out results/convergence
"""
import argparse
from pathlib import Path

from schrobpx.cli import CONVERGENCE_COLUMNS
from schrobpx.config import load
from schrobpx.pipeline import convergence_table
from schrobpx.reports import write_csv

HERE = Path(__file__).parent / "configs"
CASES = ("bpx_T15", "none_T15", "none_T40")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/convergence"))
    ap.add_argument("--cases", nargs="*", default=list(CASES))
    args = ap.parse_args()
    for case in args.cases:
        rows = convergence_table(load(HERE / f"{case}.ini"))
        write_csv(rows, args.out / f"{case}.csv", CONVERGENCE_COLUMNS)
        print(f"\n{case}")
        print(f"{'J':>2} {'h':>8} {'N':>5} {'L2err':>10} {'H1err':>10} {'L2ord':>6} {'H1ord':>6} {'kappa_BA':>9}")
        for r in rows:
            if "error" in r:
                print(f"{r['level']:>2} failed: {r['error']}")
                continue
            o2 = "" if r.get("L2order") is None else f"{r['L2order']:.2f}"
            o1 = "" if r.get("H1order") is None else f"{r['H1order']:.2f}"
            print(f"{r['level']:>2} {r['h']:8.5f} {r['N']:5d} {r['L2err']:10.3e} {r['H1err']:10.3e} "
                  f"{o2:>6} {o1:>6} {r['kappa_BA']:9.2f}")


if __name__ == "__main__":
    main()
