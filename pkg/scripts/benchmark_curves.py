"""Emit the benchmark potential curves for both queue families.

Writes one CSV per family (columns z, i, phi from the closed forms) and
prints how far the series and truncation solvers drift from those curves,
with timings.  A quick smoke report for solver regressions:

    python3 scripts/benchmark_curves.py --out-dir curves --i-max 20
"""

import argparse
import csv
import time
from pathlib import Path

from skipfree.downward import DownwardEngine, potential_downward
from skipfree.models import (GiM1Params, MG1Params, gim1_benchmark_cost,
                             gim1_chain, gim1_closed_potential,
                             mg1_benchmark_cost, mg1_chain,
                             mg1_closed_potential)
from skipfree.truncation import northwest_truncate, solve_truncated_potential
from skipfree.upward import potential_upward

UPWARD_Z = (3.0, 5.0, 10.0)
DOWNWARD_Z = (1.2, 1.5, 1.8)


def _write_curve(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "i", "phi"])
        for z, i, phi in rows:
            w.writerow([f"{z:.17g}", i, f"{phi:.17g}"])


def _family(z_values, make, i_max: int):
    """Yield (z, closed curve, series solver, truncation solver) tuples."""
    states = list(range(i_max + 1))
    for z in z_values:
        kernel, cost, closed, series = make(z)
        curve = [closed(i) for i in states]
        t0 = time.perf_counter()
        got_series = series(kernel, cost, states)
        t1 = time.perf_counter()
        corner = solve_truncated_potential(northwest_truncate(kernel, 400), cost)
        t2 = time.perf_counter()
        err_s = max(abs(a - b) / b for a, b in zip(got_series, curve))
        err_t = max(abs(corner.phi[i] - curve[i]) / curve[i] for i in states)
        yield z, curve, (err_s, t1 - t0), (err_t, t2 - t1)


def _upward(z: float):
    params = GiM1Params(z)
    return (gim1_chain(params), gim1_benchmark_cost(params),
            gim1_closed_potential(params),
            lambda k, c, s: potential_upward(k, c, s).values)


def _downward(z: float):
    params = MG1Params(z)

    def series(k, c, s):
        return potential_downward(k, c, s, engine=DownwardEngine(k)).values

    return (mg1_chain(params), mg1_benchmark_cost(params),
            mg1_closed_potential(params), series)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="curves", help="directory for the CSVs")
    ap.add_argument("--i-max", type=int, default=20)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, z_values, make in (("upward_queue", UPWARD_Z, _upward),
                                 ("downward_queue", DOWNWARD_Z, _downward)):
        rows = []
        print(f"{name}:")
        for z, curve, (err_s, t_s), (err_t, t_t) in _family(z_values, make,
                                                            args.i_max):
            rows.extend((z, i, phi) for i, phi in enumerate(curve))
            print(f"  z={z:<4g} series err {err_s:.2e} ({t_s * 1e3:6.1f} ms)"
                  f"  truncation err {err_t:.2e} ({t_t * 1e3:6.1f} ms)")
        path = out / f"{name}_potential.csv"
        _write_curve(path, rows)
        print(f"  wrote {path}")


if __name__ == "__main__":
    main()
