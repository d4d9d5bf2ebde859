"""Tabulate truncated potentials across corner levels for a chain spec.

Takes the same JSON spec files as the CLI, runs every requested level
(no early stopping), prints the level table, and optionally writes the
sweep CSV:

    python3 scripts/convergence_study.py chain.json --i 0 1 5 --out sweep.csv
"""

import argparse
import sys

from skipfree.ctmc import ctmc_potential_sweep
from skipfree.specfile import load_spec
from skipfree.truncation import potential_sweep, write_sweep_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("spec", help="JSON chain spec (same schema as the CLI)")
    ap.add_argument("--i", type=int, nargs="+", default=[0],
                    help="states to track")
    ap.add_argument("--levels", type=int, nargs="+",
                    default=[25, 50, 100, 200, 400, 800])
    ap.add_argument("--tol", type=float, default=1e-9)
    ap.add_argument("--out", help="write the sweep CSV here")
    args = ap.parse_args()

    bundle = load_spec(args.spec)
    sweep_fn = ctmc_potential_sweep if bundle.is_continuous else potential_sweep
    sweep = sweep_fn(bundle.model, bundle.cost, args.i,
                     levels=sorted(args.levels), tol=args.tol,
                     stop_early=False)

    header = "level " + "".join(f"{f'phi({i})':>24}" for i in sweep.targets)
    print(f"{bundle.label}")
    print(header)
    for r, n in enumerate(sweep.levels):
        print(f"{n:>5} " + "".join(f"{v:>24.16g}" for v in sweep.table[r]))
    print(f"status: {sweep.status.name.lower()}, last gap {sweep.gap:.3e}")
    if args.out:
        if len(args.i) != 1:
            ap.error("--out emits a single-state sweep; pass exactly one --i")
        write_sweep_csv(args.out, sweep)
        print(f"wrote {args.out}")
    return 0 if sweep.converged else 3


if __name__ == "__main__":
    sys.exit(main())
