"""Downward skip-free solvers: H-coefficient tables, the origin cost
weight, the origin-visit ratio limit, potentials, Green entries, the
classifier, and the horizon-extension identity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skipfree.chain import (CapabilityError, CostFunction, Status, Structure,
                            TransitionKernel)
from skipfree.downward import (DownwardEngine, classify_downward,
                               coefficient_extension_residual,
                               downward_coefficient_table, green_downward,
                               origin_cost_weight, potential_downward,
                               tail_cost_sum, tail_cost_sum_by_recursion,
                               visits_to_origin)
from skipfree.models import (MG1Params, mg1_benchmark_cost, mg1_chain,
                             mg1_closed_coefficient, mg1_closed_delta,
                             mg1_closed_m, mg1_closed_potential)
from skipfree.truncation import northwest_truncate, truncated_green

from support import dense_downward_kernel, random_cost, rng_for


# ---------------------------------------------------------------------------
# coefficient tables


def test_mg1_coefficients_match_closed_form():
    for z in (1.5, 2.0, 2.5):
        params = MG1Params(z=z)
        k = mg1_chain(params)
        engine = DownwardEngine(k)
        for target in (1, 7, 25, 60):
            table = downward_coefficient_table(k, target, engine=engine)
            for m in range(1, target + 1):
                want = mg1_closed_coefficient(params, m, target)
                assert table.values[m - 1] == pytest.approx(want, rel=1e-12)


def test_mg1_coefficient_spot_value():
    # z = 2, target 4, m = 1: 1 / (z (z-1)^(target-m)) = 1/2
    table = downward_coefficient_table(mg1_chain(MG1Params(z=2.0)), 4)
    assert table.values[0] == pytest.approx(0.5, rel=1e-13)
    assert table.values[3] == 1.0  # H at the target itself


def test_coefficient_table_satisfies_its_recursion():
    k = dense_downward_kernel(rng_for(41), 40)
    target = 30
    engine = DownwardEngine(k)
    coef = {m: engine.coefficient(m, target) for m in range(1, target + 1)}
    for m in range(1, target):
        tails = k.tail_weights(m, target)
        recon = float(tails @ [coef[j] for j in range(m + 1, target + 1)])
        recon /= k.down_weight(m)
        assert recon == pytest.approx(coef[m], rel=1e-12)


def test_engine_caches_tables_per_target():
    k = mg1_chain(MG1Params(z=1.5))
    engine = DownwardEngine(k)
    a = engine.coefficient(2, 9)
    b = engine.coefficient(2, 9)
    assert a == b
    assert 9 in engine._tables


def test_downward_requires_structure_and_tail_capability():
    upward_only = TransitionKernel.from_dense(
        np.array([[0.5, 0.5, 0.0], [0.4, 0.1, 0.5], [0.2, 0.3, 0.5]]),
        structure=Structure.UPWARD_SKIP_FREE)
    with pytest.raises(CapabilityError):
        downward_coefficient_table(upward_only, 2)
    no_tails = TransitionKernel(
        structure=Structure.DOWNWARD_SKIP_FREE, n_states=None,
        row_builder=lambda i, j_max: np.zeros(j_max + 1),
        support_end=lambda i: None, tail_oracle=None, label="tailless")
    with pytest.raises(CapabilityError):
        downward_coefficient_table(no_tails, 2)


# ---------------------------------------------------------------------------
# two routes to the tail cost sum


def test_tail_cost_sum_routes_agree_on_random_chains():
    for seed in range(25):
        rng = rng_for(2000 + seed)
        k = dense_downward_kernel(rng, 40)
        cost = random_cost(rng)
        n = int(rng.integers(2, 31))
        i = int(rng.integers(1, n + 1))
        a = tail_cost_sum(k, cost, i, n)
        b = tail_cost_sum_by_recursion(k, cost, i, n)
        assert b == pytest.approx(a, rel=1e-10, abs=1e-14)


def test_tail_cost_sum_bounds_checked():
    k = dense_downward_kernel(rng_for(1), 10)
    with pytest.raises(ValueError):
        tail_cost_sum(k, CostFunction.zero(), 0, 5)
    with pytest.raises(ValueError):
        tail_cost_sum_by_recursion(k, CostFunction.zero(), 6, 5)


# ---------------------------------------------------------------------------
# origin cost weight and origin-visit limit


def test_mg1_origin_cost_weight_matches_closed_form():
    for z in (1.2, 1.5, 1.8):
        params = MG1Params(z=z)
        out = origin_cost_weight(mg1_chain(params), mg1_benchmark_cost(params))
        assert out.status is Status.CONVERGED
        assert out.value == pytest.approx(mg1_closed_delta(params), rel=1e-9)


def test_mg1_origin_visits_match_closed_form():
    params = MG1Params(z=1.5)
    k = mg1_chain(params)
    closed = mg1_closed_m(params)
    engine = DownwardEngine(k)
    for i in (0, 2, 3, 6):
        out = visits_to_origin(k, i, engine=engine)
        assert out.verdict.status is Status.CONVERGED
        assert out.verdict.value == pytest.approx(closed(i), rel=1e-9)
    spot = visits_to_origin(k, 2, engine=engine)
    assert spot.verdict.value == pytest.approx(0.5, rel=1e-9)


def test_origin_visits_diverge_in_recurrent_regime():
    out = visits_to_origin(mg1_chain(MG1Params(z=2.5)), 0)
    assert out.verdict.status is Status.DIVERGED


def test_origin_visits_need_infinite_chain():
    k = dense_downward_kernel(rng_for(9), 20)
    with pytest.raises(CapabilityError):
        visits_to_origin(k, 0)


# ---------------------------------------------------------------------------
# potentials


def test_mg1_potential_matches_closed_form():
    for z in (1.2, 1.5, 1.8):
        params = MG1Params(z=z)
        closed = mg1_closed_potential(params)
        out = potential_downward(mg1_chain(params), mg1_benchmark_cost(params),
                                 states=range(21))
        assert out.status is Status.CONVERGED
        np.testing.assert_allclose(out.values, [closed(i) for i in range(21)],
                                   rtol=1e-6)


def test_mg1_potential_first_values():
    out = potential_downward(mg1_chain(MG1Params(z=1.5)),
                             mg1_benchmark_cost(MG1Params(z=1.5)),
                             states=[0, 1, 2])
    np.testing.assert_allclose(out.values, [0.5, 5.0 / 6.0, 11.0 / 18.0],
                               rtol=1e-9)


def test_closed_m_override_gives_same_potential():
    params = MG1Params(z=1.5)
    k = mg1_chain(params)
    cost = mg1_benchmark_cost(params)
    generic = potential_downward(k, cost, states=[0, 3, 8])
    fast = potential_downward(k, cost, states=[0, 3, 8],
                              closed_m=mg1_closed_m(params))
    np.testing.assert_allclose(fast.values, generic.values, rtol=1e-8)


def test_cancellation_guard_keeps_deep_states_accurate():
    # far from the origin the two halves of the formula nearly cancel; the
    # guard retries at a tighter tolerance and the closed form checks it
    params = MG1Params(z=1.2)
    closed = mg1_closed_potential(params)
    out = potential_downward(mg1_chain(params), mg1_benchmark_cost(params),
                             states=[25])
    assert out.values[0] == pytest.approx(closed(25), rel=1e-6)


def test_zero_cost_short_circuits_even_when_visits_diverge():
    # recurrent chain: the visit count is infinite, but zero cost means a
    # zero potential with no divergent evaluation attempted
    out = potential_downward(mg1_chain(MG1Params(z=2.5)), CostFunction.zero(),
                             states=[0, 4])
    assert out.status is Status.CONVERGED
    assert out.values.tolist() == [0.0, 0.0]


def test_recurrent_chain_positive_cost_diverges():
    params = MG1Params(z=2.5)
    out = potential_downward(mg1_chain(params), mg1_benchmark_cost(params),
                             states=[0])
    assert out.status is Status.DIVERGED
    assert out.values[0] == math.inf


# ---------------------------------------------------------------------------
# Green entries


def test_mg1_green_first_column_is_the_visit_count():
    params = MG1Params(z=1.5)
    k = mg1_chain(params)
    closed = mg1_closed_m(params)
    out = green_downward(k, rows=[0, 1, 3], cols=[0])
    np.testing.assert_allclose(out.matrix[:, 0],
                               [closed(0), closed(1), closed(3)], rtol=1e-9)
    assert out.matrix[2, 0] == pytest.approx(0.25, rel=1e-9)


def test_mg1_green_matches_truncated_inverse():
    k = mg1_chain(MG1Params(z=1.5))
    rows = [0, 1, 2, 5]
    cols = [0, 1, 3, 6, 9]
    out = green_downward(k, rows=rows, cols=cols)
    assert out.status is Status.CONVERGED
    dense = truncated_green(northwest_truncate(k, 400))
    np.testing.assert_allclose(out.matrix, dense[np.ix_(rows, cols)], rtol=1e-7)


def test_mg1_green_narrow_band_at_heavy_cancellation():
    # at z close to 1 each extra column above the row loses about 0.7
    # digits to cancellation, so only a narrow band is comparable
    k = mg1_chain(MG1Params(z=1.2))
    rows = [0, 2]
    cols = [0, 2, 4, 7]
    out = green_downward(k, rows=rows, cols=cols)
    dense = truncated_green(northwest_truncate(k, 600))
    np.testing.assert_allclose(out.matrix, dense[np.ix_(rows, cols)], rtol=1e-6)


def test_green_entries_are_nonnegative():
    out = green_downward(mg1_chain(MG1Params(z=1.5)), rows=range(4),
                         cols=range(8))
    assert (out.matrix >= 0.0).all()


# ---------------------------------------------------------------------------
# classification


def test_classify_mg1_both_regimes():
    for z in (1.2, 1.8):
        out = classify_downward(mg1_chain(MG1Params(z=z)))
        assert out.verdict.value == "Transient"
        assert math.isfinite(out.criterion.value)
    for z in (2.0, 3.0):
        out = classify_downward(mg1_chain(MG1Params(z=z)))
        assert out.verdict.value == "Recurrent"
        assert out.criterion.value == math.inf


# ---------------------------------------------------------------------------
# horizon-extension identity


def test_extension_identity_on_packaged_chains():
    for z in (1.2, 1.5, 2.0, 2.5):
        k = mg1_chain(MG1Params(z=z))
        engine = DownwardEngine(k)
        for i, n in [(1, 5), (3, 20), (10, 50), (1, 50)]:
            assert coefficient_extension_residual(k, i, n, engine=engine) <= 1e-10


def test_extension_identity_on_random_chains():
    for seed in range(10):
        rng = rng_for(3000 + seed)
        k = dense_downward_kernel(rng, 55)
        engine = DownwardEngine(k)
        for _ in range(4):
            n = int(rng.integers(2, 51))
            i = int(rng.integers(1, n + 1))
            assert coefficient_extension_residual(k, i, n, engine=engine) <= 1e-10


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 28))
def test_tail_cost_sum_routes_agree_property(seed, n):
    rng = rng_for(seed)
    k = dense_downward_kernel(rng, 32)
    cost = random_cost(rng, "table")
    i = int(rng.integers(1, n + 1))
    a = tail_cost_sum(k, cost, i, n)
    b = tail_cost_sum_by_recursion(k, cost, i, n)
    assert b == pytest.approx(a, rel=1e-10, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 40))
def test_extension_identity_property(seed, n):
    rng = rng_for(seed)
    k = dense_downward_kernel(rng, 45)
    i = int(rng.integers(1, n + 1))
    assert coefficient_extension_residual(k, i, n) <= 1e-10
