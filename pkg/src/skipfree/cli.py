"""Command-line front end.

Subcommands: ``potential``, ``green``, ``classify``, ``converge``,
``simulate``, ``figure``.  Chains come from JSON spec files (see the
specfile module); every CSV written gets a sibling ``*.manifest.json``
recording the command, model, parameters, tolerances, solver path, and
timestamp, so any output file is reproducible from its manifest alone.

Exit codes: 0 when every requested computation converged (or the verdict
is definite), 2 when a result certifiably diverged, 3 when evaluation hit
an index/horizon cap or oscillated, 1 on usage or format errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from .chain import (CapabilityError, ChainClass, FormatError, RegimeError,
                    SingularTruncation, Status, Structure, StructureViolation)
from .ctmc import (birth_death_potential, classify_ct, ctmc_green_sweep,
                   ctmc_potential_sweep, green_downward_ct, green_upward_ct,
                   potential_downward_ct, potential_upward_ct,
                   truncate_generator)
from .downward import classify_downward, green_downward, potential_downward
from .models import (GiM1Params, MG1Params, gim1_closed_potential,
                     mg1_closed_potential)
from .series import SeriesPolicy
from .simulate import simulate_ctmc, simulate_dtmc
from .specfile import ModelBundle, load_spec
from .truncation import (DEFAULT_LEVELS, green_sweep, northwest_truncate,
                         potential_sweep, write_sweep_csv)
from .upward import classify_upward, green_upward, potential_upward

SERIES_TOL = 1e-10
SWEEP_TOL = 1e-9


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1 (argparse defaults to 2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _status_exit(status: Status) -> int:
    if status is Status.CONVERGED:
        return 0
    if status is Status.DIVERGED:
        return 2
    return 3


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _parse_states(text: str) -> list[int]:
    """State list syntax: '7', '0:30' (inclusive), or '0,5,12'."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi = part.split(":", 1)
            a, b = int(lo), int(hi)
            if b < a:
                raise FormatError(f"empty state range {part!r}")
            out.extend(range(a, b + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise FormatError(f"no states in {text!r}")
    if min(out) < 0:
        raise FormatError("states must be nonnegative")
    return out


def _parse_levels(text: str) -> list[int]:
    lv = sorted({int(p) for p in text.split(",") if p.strip()})
    if not lv:
        raise FormatError(f"no levels in {text!r}")
    return lv


def _write_csv(path: str, header: str, rows: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(r + "\n")


def _write_manifest(csv_path: str, command: str, spec: Optional[str],
                    bundle: Optional[ModelBundle], parameters: dict,
                    tolerances: dict, solver_path: str) -> None:
    doc = {
        "command": command,
        "spec_file": os.path.abspath(spec) if spec else None,
        "model": None if bundle is None else {
            "family": bundle.family,
            "params": bundle.params,
            "cost_kind": bundle.cost.kind,
            "label": bundle.label,
        },
        "parameters": parameters,
        "tolerances": tolerances,
        "solver_path": solver_path,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "outputs": [os.path.abspath(csv_path)],
    }
    root, _ = os.path.splitext(csv_path)
    with open(root + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _truncation_levels(n_max: int) -> list[int]:
    lv = [n for n in DEFAULT_LEVELS if n <= n_max]
    if n_max not in lv:
        lv.append(n_max)
    return sorted(lv)


# -- potential -----------------------------------------------------------------


def _potential_closed(bundle: ModelBundle, states: list[int], tol: float):
    if bundle.generator is not None:
        if (Structure.UPWARD_SKIP_FREE in bundle.generator.structure
                and Structure.DOWNWARD_SKIP_FREE in bundle.generator.structure):
            res = birth_death_potential(bundle.generator, bundle.cost, states,
                                        SeriesPolicy(tol=tol))
            return res.values, res.status
        raise CapabilityError("no closed form for this generator")
    if bundle.closed_potential is None:
        raise CapabilityError(
            "no closed form for this family/cost combination")
    vals = np.array([bundle.closed_potential(i) for i in states])
    return vals, Status.CONVERGED


def _potential_series(bundle: ModelBundle, states: list[int], tol: float):
    pol = SeriesPolicy(tol=tol)
    model = bundle.model
    if Structure.UPWARD_SKIP_FREE in model.structure:
        fn = potential_upward_ct if bundle.is_continuous else potential_upward
        res = fn(model, bundle.cost, states, pol)
    elif Structure.DOWNWARD_SKIP_FREE in model.structure:
        fn = potential_downward_ct if bundle.is_continuous else potential_downward
        res = fn(model, bundle.cost, states, pol, closed_m=bundle.closed_m)
    else:
        raise CapabilityError(
            "series evaluation needs a skip-free structure tag; "
            "use --method truncation")
    return res.values, res.status


def _potential_truncation(bundle: ModelBundle, states: list[int], tol: float,
                          n_max: int):
    lv = _truncation_levels(n_max)
    fn = ctmc_potential_sweep if bundle.is_continuous else potential_sweep
    sweep = fn(bundle.model, bundle.cost, states, levels=lv, tol=tol)
    return sweep.values, sweep.status


def cmd_potential(args) -> int:
    bundle = load_spec(args.spec)
    states = _parse_states(args.i)
    series_tol = args.tol if args.tol is not None else SERIES_TOL
    sweep_tol = args.tol if args.tol is not None else SWEEP_TOL
    order = (["closed", "series", "truncation"] if args.method == "auto"
             else [args.method])
    last_exc: Optional[Exception] = None
    values = status = used = None
    for m in order:
        try:
            if m == "closed":
                values, status = _potential_closed(bundle, states, series_tol)
                used = "closed-form"
            elif m == "series":
                values, status = _potential_series(bundle, states, series_tol)
                used = "series"
            else:
                values, status = _potential_truncation(
                    bundle, states, sweep_tol, args.n_max)
                used = "truncation"
            break
        except (CapabilityError, RegimeError) as exc:
            last_exc = exc
            continue
    if values is None:
        raise CapabilityError(
            f"no applicable solver path for {bundle.label}: {last_exc}")

    header = "i,phi,status,path"
    rows = [f"{i},{_fmt(v)},{status.value},{used}"
            for i, v in zip(states, values)]
    if args.out:
        _write_csv(args.out, header, rows)
        _write_manifest(
            args.out, "potential", args.spec, bundle,
            {"i": states, "method": args.method, "n_max": args.n_max},
            {"series": series_tol, "sweep": sweep_tol}, used)
        print(f"wrote {args.out} ({len(rows)} states, path: {used}, "
              f"status: {status.value})")
    else:
        print(header)
        for r in rows:
            print(r)
    return _status_exit(status)


# -- green ---------------------------------------------------------------------


def _green_series(bundle: ModelBundle, rows: list[int], cols: list[int],
                  tol: float):
    pol = SeriesPolicy(tol=tol)
    model = bundle.model
    if Structure.UPWARD_SKIP_FREE in model.structure:
        fn = green_upward_ct if bundle.is_continuous else green_upward
        res = fn(model, rows, cols, pol)
    elif Structure.DOWNWARD_SKIP_FREE in model.structure:
        fn = green_downward_ct if bundle.is_continuous else green_downward
        res = fn(model, rows, cols, pol, closed_m=bundle.closed_m)
    else:
        raise CapabilityError(
            "series evaluation needs a skip-free structure tag; "
            "use --method truncation")
    return res.matrix, res.status


def _green_truncation(bundle: ModelBundle, rows: list[int], cols: list[int],
                      tol: float, n_max: int):
    entries = [(i, j) for i in rows for j in cols]
    lv = _truncation_levels(n_max)
    fn = ctmc_green_sweep if bundle.is_continuous else green_sweep
    sweep = fn(bundle.model, entries, levels=lv, tol=tol)
    return sweep.values.reshape(len(rows), len(cols)), sweep.status


def cmd_green(args) -> int:
    bundle = load_spec(args.spec)
    rows = _parse_states(args.i)
    cols = _parse_states(args.j)
    series_tol = args.tol if args.tol is not None else SERIES_TOL
    sweep_tol = args.tol if args.tol is not None else SWEEP_TOL
    order = (["series", "truncation"] if args.method == "auto"
             else [args.method])
    last_exc: Optional[Exception] = None
    matrix = status = used = None
    for m in order:
        try:
            if m == "series":
                matrix, status = _green_series(bundle, rows, cols, series_tol)
                used = "series"
            else:
                matrix, status = _green_truncation(
                    bundle, rows, cols, sweep_tol, args.n_max)
                used = "truncation"
            break
        except (CapabilityError, RegimeError) as exc:
            last_exc = exc
            continue
    if matrix is None:
        raise CapabilityError(
            f"no applicable solver path for {bundle.label}: {last_exc}")

    header = "i,j,value,status,path"
    lines = [f"{i},{j},{_fmt(matrix[ri, cj])},{status.value},{used}"
             for ri, i in enumerate(rows) for cj, j in enumerate(cols)]
    if args.out:
        _write_csv(args.out, header, lines)
        _write_manifest(
            args.out, "green", args.spec, bundle,
            {"i": rows, "j": cols, "method": args.method, "n_max": args.n_max},
            {"series": series_tol, "sweep": sweep_tol}, used)
        print(f"wrote {args.out} ({len(lines)} entries, path: {used}, "
              f"status: {status.value})")
    else:
        print(header)
        for ln in lines:
            print(ln)
    return _status_exit(status)


# -- classify / converge / simulate ---------------------------------------------


_CRITERION_NAME = {
    "upward": "upward crossing coefficient sum",
    "downward": "origin-visit ratio",
}


def cmd_classify(args) -> int:
    bundle = load_spec(args.spec)
    model = bundle.model
    if bundle.is_continuous:
        result = classify_ct(model)
        name = (_CRITERION_NAME["upward"]
                if Structure.UPWARD_SKIP_FREE in model.structure
                else _CRITERION_NAME["downward"])
    elif Structure.UPWARD_SKIP_FREE in model.structure:
        result = classify_upward(model)
        name = _CRITERION_NAME["upward"]
    elif Structure.DOWNWARD_SKIP_FREE in model.structure:
        result = classify_downward(model)
        name = _CRITERION_NAME["downward"]
    else:
        raise CapabilityError(
            "classification needs a skip-free structure tag")
    value = result.criterion.value
    if math.isinf(value):
        print(f"{result.verdict.value} ({name} diverges)")
    else:
        print(f"{result.verdict.value} ({name} = {_fmt(value)})")
    if result.verdict is ChainClass.UNKNOWN:
        return 3
    return 0


def cmd_converge(args) -> int:
    bundle = load_spec(args.spec)
    state = int(args.i)
    tol = args.tol if args.tol is not None else SWEEP_TOL
    levels = (_parse_levels(args.levels) if args.levels
              else list(DEFAULT_LEVELS))
    fn = ctmc_potential_sweep if bundle.is_continuous else potential_sweep
    sweep = fn(bundle.model, bundle.cost, [state], levels=levels, tol=tol,
               stop_early=False)
    for n, row in zip(sweep.levels, sweep.table):
        print(f"n={n}: {_fmt(row[0])}")
    print(f"status: {sweep.status.value} (last relative gap {sweep.gap:.3g})")
    if args.out:
        write_sweep_csv(args.out, sweep)
        _write_manifest(
            args.out, "converge", args.spec, bundle,
            {"i": state, "levels": list(sweep.levels)}, {"sweep": tol},
            "truncation")
        print(f"wrote {args.out}")
    return _status_exit(sweep.status)


def cmd_simulate(args) -> int:
    bundle = load_spec(args.spec)
    start = int(args.i)
    n = args.n_max
    if bundle.model.n_states is not None:
        n = min(n, bundle.model.n_states - 2)
        if n < start:
            raise CapabilityError("corner too small for the start state")
    if n < start:
        raise CapabilityError(
            f"--n-max {args.n_max} below the start state {start}")
    if bundle.is_continuous:
        trunc = truncate_generator(bundle.generator, n)
        est = simulate_ctmc(trunc, bundle.cost, start=start, reps=args.reps,
                            seed=args.seed)
    else:
        trunc = northwest_truncate(bundle.kernel, n)
        est = simulate_dtmc(trunc, bundle.cost, start=start, reps=args.reps,
                            seed=args.seed)
    print(f"mean = {_fmt(est.mean)}")
    print(f"std_error = {_fmt(est.std_error)}")
    print(f"replications = {est.replications}, seed = {est.seed}, corner n = {n}")
    if args.out:
        _write_csv(args.out, "i,mean,std_error,replications,seed",
                   [f"{start},{_fmt(est.mean)},{_fmt(est.std_error)},"
                    f"{est.replications},{est.seed}"])
        _write_manifest(
            args.out, "simulate", args.spec, bundle,
            {"i": start, "reps": args.reps, "seed": args.seed, "n": n},
            {}, "simulation")
        print(f"wrote {args.out}")
    return 0


# -- figure data ----------------------------------------------------------------


def cmd_figure(args) -> int:
    rows: list[str] = []
    if args.example == 1:
        zs = (3.0, 5.0, 10.0)
        for z in zs:
            phi = gim1_closed_potential(GiM1Params(z=z))
            rows.extend(f"{z:g},{i},{_fmt(phi(i))}" for i in range(21))
        family = "gim1"
    else:
        zs = (1.2, 1.5, 1.8)
        for z in zs:
            phi = mg1_closed_potential(MG1Params(z=z))
            rows.extend(f"{z:g},{i},{_fmt(phi(i))}" for i in range(21))
        family = "mg1"
    _write_csv(args.out, "z,i,phi", rows)
    _write_manifest(
        args.out, "figure", None, None,
        {"example": args.example, "family": family, "z": list(zs),
         "i": "0:20"},
        {}, "closed-form")
    print(f"wrote {args.out} ({len(rows)} rows, family {family})")
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skipfree",
                description="Potentials and Green matrices of skip-free "
                            "Markov chains, in discrete and continuous time.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def add_spec(sp):
        sp.add_argument("spec", help="JSON chain spec file")

    sp = sub.add_parser("potential",
                        help="potential (expected total cost) at states")
    add_spec(sp)
    sp.add_argument("--i", default="0:20",
                    help="states: '7', '0:30', or '0,5,12' (default 0:20)")
    sp.add_argument("--method", default="auto",
                    choices=["closed", "series", "truncation", "auto"])
    sp.add_argument("--tol", type=float, default=None,
                    help=f"tolerance (default {SERIES_TOL:g} series, "
                         f"{SWEEP_TOL:g} truncation)")
    sp.add_argument("--n-max", type=int, default=800,
                    help="largest truncation level (default 800)")
    sp.add_argument("--out", default=None, help="CSV output path")
    sp.set_defaults(func=cmd_potential)

    sp = sub.add_parser("green", help="Green matrix entries (expected visits)")
    add_spec(sp)
    sp.add_argument("--i", default="0", help="row states")
    sp.add_argument("--j", default="0", help="column states")
    sp.add_argument("--method", default="auto",
                    choices=["series", "truncation", "auto"])
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--n-max", type=int, default=800)
    sp.add_argument("--out", default=None, help="CSV output path")
    sp.set_defaults(func=cmd_green)

    sp = sub.add_parser("classify", help="transient/recurrent verdict")
    add_spec(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("converge",
                        help="truncated potential across increasing levels")
    add_spec(sp)
    sp.add_argument("--i", type=int, default=0, help="state (default 0)")
    sp.add_argument("--levels", default=None,
                    help="comma-separated levels (default "
                         + ",".join(str(n) for n in DEFAULT_LEVELS) + ")")
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--out", default=None, help="CSV output path")
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("simulate", help="Monte Carlo potential estimate")
    add_spec(sp)
    sp.add_argument("--i", type=int, default=0, help="start state")
    sp.add_argument("--reps", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--n-max", type=int, default=200,
                    help="truncation corner level (default 200)")
    sp.add_argument("--out", default=None, help="CSV output path")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("figure", help="benchmark curve data (CSV z,i,phi)")
    sp.add_argument("--example", type=int, choices=[1, 2], required=True,
                    help="1: upward family z=3,5,10; 2: downward family "
                         "z=1.2,1.5,1.8")
    sp.add_argument("--out", required=True, help="CSV output path")
    sp.set_defaults(func=cmd_figure)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, CapabilityError, RegimeError, StructureViolation,
            SingularTruncation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
