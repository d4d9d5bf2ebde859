"""End-to-end acceptance battery.

Each test covers one release gate and prints a single ACCEPTANCE line with
the measured figure of merit, so a bare ``pytest -v -rA`` run doubles as the
sign-off report.  Tolerances here are the contractual ones; the unit suites
pin the same code paths far tighter.
"""

import math
import time

import numpy as np

from skipfree.chain import ChainClass, CostFunction, Status
from skipfree.ctmc import (birth_death_potential, ctmc_truncated_potential,
                           embed, potential_upward_ct, truncate_generator)
from skipfree.downward import (DownwardEngine, classify_downward,
                               coefficient_extension_residual, green_downward,
                               potential_downward, tail_cost_sum,
                               tail_cost_sum_by_recursion)
from skipfree.models import (BirthDeathParams, GiM1Params, MG1Params,
                             birth_death_generator, gim1_benchmark_cost,
                             gim1_chain, gim1_closed_potential,
                             mg1_benchmark_cost, mg1_chain,
                             mg1_closed_potential)
from skipfree.series import SeriesPolicy, stabilize_sequence
from skipfree.simulate import simulate_ctmc, simulate_dtmc
from skipfree.truncation import (green_sweep, northwest_truncate,
                                 potential_sweep, solve_truncated_potential,
                                 truncated_green)
from skipfree.upward import (classify_upward, green_upward, potential_upward,
                             weighted_cost_sum, weighted_cost_sum_by_recursion)

from support import (dense_downward_kernel, dense_upward_kernel, random_cost,
                     random_repeating_kernel, rng_for)


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} {detail}")


def _rel(got: float, want: float) -> float:
    return abs(got - want) / max(abs(want), 1e-300)


def test_01_upward_queue_truncation_matches_closed_form():
    # level-400 corner solves against the analytic potential, 31 states,
    # three tail parameters; contract: 1e-8 relative inside 5 seconds
    t0 = time.perf_counter()
    worst = 0.0
    for z in (3.0, 5.0, 10.0):
        params = GiM1Params(z)
        kernel = gim1_chain(params)
        cost = gim1_benchmark_cost(params)
        closed = gim1_closed_potential(params)
        phi = solve_truncated_potential(northwest_truncate(kernel, 400), cost).phi
        for i in range(31):
            worst = max(worst, _rel(phi[i], closed(i)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed <= 5.0
    _report(1, ok, f"upward queue, truncation level 400 vs closed form: "
                   f"worst rel err {worst:.3e}, {elapsed:.2f}s")
    assert ok, (worst, elapsed)


def test_02_downward_queue_series_and_truncation_match_closed_form():
    # the generic ratio-limit/double-tail series and the level-800 corner
    # both against the analytic potential; contract: 1e-6 inside 20 seconds
    t0 = time.perf_counter()
    worst_series = 0.0
    worst_trunc = 0.0
    for z in (1.2, 1.5, 1.8):
        params = MG1Params(z)
        kernel = mg1_chain(params)
        cost = mg1_benchmark_cost(params)
        closed = mg1_closed_potential(params)
        states = list(range(31))
        series = potential_downward(kernel, cost, states,
                                    engine=DownwardEngine(kernel))
        phi = solve_truncated_potential(northwest_truncate(kernel, 800), cost).phi
        for i in states:
            want = closed(i)
            worst_series = max(worst_series, _rel(series.values[i], want))
            worst_trunc = max(worst_trunc, _rel(phi[i], want))
    elapsed = time.perf_counter() - t0
    ok = worst_series <= 1e-6 and worst_trunc <= 1e-6 and elapsed <= 20.0
    _report(2, ok, f"downward queue vs closed form: series worst {worst_series:.3e}, "
                   f"truncation worst {worst_trunc:.3e}, {elapsed:.2f}s")
    assert ok, (worst_series, worst_trunc, elapsed)


def test_03_truncated_values_nondecreasing_in_level():
    # corner solves can only grow as the corner grows; checked for 100
    # seeded banded chains plus both queue models, potentials and Green
    # entries, at levels 25/50/100/200 with rounding slack 1e-12 * scale
    levels = (25, 50, 100, 200)
    chains = []
    for seed in range(100):
        rng = rng_for(1000 + seed)
        chains.append((random_repeating_kernel(rng), random_cost(rng)))
    gp, mp = GiM1Params(3.0), MG1Params(1.5)
    chains.append((gim1_chain(gp), gim1_benchmark_cost(gp)))
    chains.append((mg1_chain(mp), mg1_benchmark_cost(mp)))

    violations = 0
    for kernel, cost in chains:
        prev_phi = None
        prev_g = None
        for n in levels:
            trunc = northwest_truncate(kernel, n)
            phi = solve_truncated_potential(trunc, cost).phi[[0, 3, 10]]
            G = truncated_green(trunc)
            g = np.array([G[0, 0], G[2, 5], G[7, 1]])
            if prev_phi is not None:
                slack = 1e-12 * np.maximum(np.abs(phi), 1.0)
                violations += int(np.sum(phi < prev_phi - slack))
                slack_g = 1e-12 * np.maximum(np.abs(g), 1.0)
                violations += int(np.sum(g < prev_g - slack_g))
            prev_phi, prev_g = phi, g
    ok = violations == 0
    _report(3, ok, f"monotone truncation levels {levels} over "
                   f"{len(chains)} chains: {violations} violations")
    assert ok, violations


def test_04_cost_sum_recursion_agrees_with_definition():
    # the forward/backward recursions against the explicit coefficient-table
    # sums, 100 random upward plus 100 random downward chains, depth <= 30
    worst = 0.0
    for seed in range(100):
        rng = rng_for(2000 + seed)
        kernel = dense_upward_kernel(rng, 40)
        cost = random_cost(rng)
        n = int(rng.integers(1, 31))
        base = int(rng.integers(0, n + 1))
        a = weighted_cost_sum(kernel, cost, n, base)
        b = weighted_cost_sum_by_recursion(kernel, cost, n, base)
        worst = max(worst, abs(a - b) / max(1.0, abs(a), abs(b)))
    for seed in range(100):
        rng = rng_for(3000 + seed)
        kernel = dense_downward_kernel(rng, 40)
        cost = random_cost(rng)
        n = int(rng.integers(1, 31))
        i = int(rng.integers(1, n + 1))
        a = tail_cost_sum(kernel, cost, i, n)
        b = tail_cost_sum_by_recursion(kernel, cost, i, n)
        worst = max(worst, abs(a - b) / max(1.0, abs(a), abs(b)))
    ok = worst <= 1e-10
    _report(4, ok, f"cost-sum recursions vs definitions on 200 random chains: "
                   f"worst rel gap {worst:.3e}")
    assert ok, worst


def test_05_coefficient_extension_identity():
    # extending the horizon by one level must reproduce the next coefficient
    # exactly; packaged downward queues and 50 random chains, depth <= 50
    worst = 0.0
    for z in (1.2, 1.5, 2.0, 2.5):
        kernel = mg1_chain(MG1Params(z))
        engine = DownwardEngine(kernel)
        for i, n in ((1, 10), (3, 25), (1, 50), (7, 50)):
            worst = max(worst, coefficient_extension_residual(kernel, i, n,
                                                              engine=engine))
    for seed in range(50):
        rng = rng_for(4000 + seed)
        kernel = dense_downward_kernel(rng, 60)
        n = int(rng.integers(1, 51))
        i = int(rng.integers(1, n + 1))
        worst = max(worst, coefficient_extension_residual(kernel, i, n))
    ok = worst <= 1e-10
    _report(5, ok, f"coefficient extension identity, packaged + 50 random "
                   f"chains: worst residual {worst:.3e}")
    assert ok, worst


def test_06_classification_verdicts():
    # both classifiers across both regimes of their queue models
    wrong = []
    for z in (2.1, 3.0, 5.0, 10.0):
        got = classify_upward(gim1_chain(GiM1Params(z))).verdict
        if got is not ChainClass.TRANSIENT:
            wrong.append(("upward", z, got))
    for z in (1.2, 1.5, 2.0):
        got = classify_upward(gim1_chain(GiM1Params(z))).verdict
        if got is not ChainClass.RECURRENT:
            wrong.append(("upward", z, got))
    for z in (1.2, 1.5, 1.8):
        got = classify_downward(mg1_chain(MG1Params(z))).verdict
        if got is not ChainClass.TRANSIENT:
            wrong.append(("downward", z, got))
    for z in (2.0, 2.5, 3.0):
        got = classify_downward(mg1_chain(MG1Params(z))).verdict
        if got is not ChainClass.RECURRENT:
            wrong.append(("downward", z, got))
    ok = not wrong
    _report(6, ok, f"13 transience/recurrence verdicts: "
                   f"{'all correct' if ok else wrong}")
    assert ok, wrong


def test_07_birth_death_potential_by_every_path():
    # tridiagonal generator, unit visit cost at the origin: the
    # stationary-weight formula, the continuous-time series, the truncated
    # rate-corner solve, and the embedded-chain reduction must all land on
    # the same two spot values
    gen = birth_death_generator(BirthDeathParams.of(2.0, 1.0))
    cost = CostFunction.indicator(0)
    want = np.array([1.0, 0.25])
    paths = {
        "stationary-weight": birth_death_potential(gen, cost, [0, 2]).values,
        "series": potential_upward_ct(gen, cost, [0, 2]).values,
        "truncated": ctmc_truncated_potential(gen, cost, 400).phi[[0, 2]],
    }
    jump = embed(gen, cost)
    embedded = potential_upward(jump.kernel, jump.cost, [0, 2]).values
    worst = max(float(np.max(np.abs(v - want))) for v in paths.values())
    worst_embedded = float(np.max(np.abs(embedded - want)))
    ok = worst <= 1e-8 and worst_embedded <= 1e-9
    _report(7, ok, f"birth-death spot values by 3 direct paths (worst abs err "
                   f"{worst:.3e}) and the embedded chain ({worst_embedded:.3e})")
    assert ok, (worst, worst_embedded)


def test_08_monte_carlo_concordance():
    # one million replications per model against the exact corner solves;
    # contract: exact value inside mean +/- 4 standard errors, 60 s total
    t0 = time.perf_counter()
    reps = 10 ** 6
    misses = []

    gp = GiM1Params(3.0)
    trunc = northwest_truncate(gim1_chain(gp), 200)
    cost = gim1_benchmark_cost(gp)
    exact = solve_truncated_potential(trunc, cost).phi[0]
    est = simulate_dtmc(trunc, cost, start=0, reps=reps, seed=20260819)
    if not est.covers(exact):
        misses.append(("upward queue", exact, est.mean, est.std_error))

    mp = MG1Params(1.5)
    trunc = northwest_truncate(mg1_chain(mp), 200)
    cost = mg1_benchmark_cost(mp)
    exact = solve_truncated_potential(trunc, cost).phi[0]
    est = simulate_dtmc(trunc, cost, start=0, reps=reps, seed=20260820)
    if not est.covers(exact):
        misses.append(("downward queue", exact, est.mean, est.std_error))

    gen = birth_death_generator(BirthDeathParams.of(2.0, 1.0))
    cost = CostFunction.indicator(0)
    exact = ctmc_truncated_potential(gen, cost, 200).phi[0]
    est = simulate_ctmc(truncate_generator(gen, 200), cost, start=0,
                        reps=reps, seed=20260821)
    if not est.covers(exact):
        misses.append(("birth-death", exact, est.mean, est.std_error))

    elapsed = time.perf_counter() - t0
    ok = not misses and elapsed <= 60.0
    _report(8, ok, f"simulation at 1e6 replications covers the exact solve "
                   f"for 3 models within 4 standard errors, {elapsed:.1f}s"
                   + ("" if not misses else f"; misses: {misses}"))
    assert ok, (misses, elapsed)


def test_09_green_entries_weighted_by_cost_reproduce_potential():
    # row sums of the Green block against the potential, summed over the
    # column index with doubling horizons until stable
    policy = SeriesPolicy(tol=1e-9)
    worst = 0.0
    for z in (3.0, 5.0, 10.0):
        params = GiM1Params(z)
        kernel = gim1_chain(params)
        cost = gim1_benchmark_cost(params)
        closed = gim1_closed_potential(params)
        for i in range(0, 11, 2):
            def total(J, i=i):
                row = green_upward(kernel, [i], list(range(J + 1))).matrix[0]
                return math.fsum(row[j] * cost(j) for j in range(J + 1))
            got = stabilize_sequence(total, [16, 32, 64, 128, 256], policy)
            worst = max(worst, _rel(got.value, closed(i)))
    for z in (1.2, 1.5, 1.8):
        params = MG1Params(z)
        kernel = mg1_chain(params)
        cost = mg1_benchmark_cost(params)
        closed = mg1_closed_potential(params)
        engine = DownwardEngine(kernel)
        for i in range(0, 11, 2):
            def total(J, i=i):
                row = green_downward(kernel, [i], list(range(J + 1)),
                                     engine=engine).matrix[0]
                return math.fsum(row[j] * cost(j) for j in range(J + 1))
            got = stabilize_sequence(total, [16, 32, 64, 128, 256, 512], policy)
            worst = max(worst, _rel(got.value, closed(i)))
    ok = worst <= 1e-6
    _report(9, ok, f"sum_j G(i,j) c(j) vs potential, both queues, i <= 10: "
                   f"worst rel err {worst:.3e}")
    assert ok, worst


def test_10_potential_shape_witnesses():
    # the downward queue potential is allowed to rise before it decays
    # (and does, at z = 1.5), while the upward queue potential must be
    # nonincreasing for every tail parameter above 2
    mp = MG1Params(1.5)
    closed = mg1_closed_potential(mp)
    series = potential_downward(mg1_chain(mp), mg1_benchmark_cost(mp), [0, 1])
    hump_closed = closed(1) > closed(0)
    hump_series = series.values[1] > series.values[0]

    monotone = True
    for z in (2.1, 3.0, 5.0, 10.0):
        params = GiM1Params(z)
        vals = potential_upward(gim1_chain(params), gim1_benchmark_cost(params),
                                list(range(21))).values
        closed_up = gim1_closed_potential(params)
        closed_vals = np.array([closed_up(i) for i in range(21)])
        monotone = monotone and bool(np.all(np.diff(vals) <= 0.0))
        monotone = monotone and bool(np.all(np.diff(closed_vals) <= 0.0))
    ok = hump_closed and hump_series and monotone
    _report(10, ok, "downward queue rises from state 0 to 1 at z=1.5; "
                    "upward queue nonincreasing for all tested z > 2")
    assert ok, (hump_closed, hump_series, monotone)
