"""Closed-form recursions for upward skip-free chains.

For a chain that can climb at most one level per step, first passage upward
from n to n+1 must pass through every level in between.  That turns the
balance equations into a one-directional recursion: with prefix masses
P_n^(k-) = sum_{j <= k} P(n, j), the coefficients

    F_b^(b) = 1,
    F_n^(b) = (1/P(n, n+1)) * sum_{k=b}^{n-1} P_n^(k-) F_k^(b)   (n > b)

count expected visits to n (relative to the start level b) before the walk
escapes upward, and everything else here is bookkeeping on top of them:

  * potential(i)   = sum_{m >= i} t_m, where t_m is the F-weighted cost sum
    at level m (computed by the same recursion with the cost folded in);
  * green(i, j)    = (1/P(j, j+1)) * sum_{m >= max(i, j)} F_m^(j);
  * the chain is transient iff sum_n F_n^(0) is finite.

All sums run through the shared series policy, so a diverging series is
reported (value inf) rather than looped on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .chain import (CapabilityError, ChainClass, Classification, ConvergentValue,
                    CostFunction, GreenResult, PotentialResult, Status, Structure,
                    TransitionKernel, worse_status)
from .series import DEFAULT_POLICY, SeriesPolicy, sum_nonnegative_series

__all__ = [
    "UpwardCoefficientTable", "upward_coefficient_table", "coefficient_triangle",
    "weighted_cost_sum", "weighted_cost_sum_by_recursion",
    "potential_upward", "green_upward", "classify_upward",
]


def _require_upward(kernel: TransitionKernel) -> None:
    if Structure.UPWARD_SKIP_FREE not in kernel.structure:
        raise CapabilityError(
            f"{kernel.label}: upward recursions need an upward skip-free kernel")


@dataclass(frozen=True)
class UpwardCoefficientTable:
    """Escape-normalized visit coefficients F_n^(base) for n = base..n_max."""

    base: int
    values: np.ndarray

    def __getitem__(self, n: int) -> float:
        if n < self.base:
            return 0.0
        return float(self.values[n - self.base])

    @property
    def n_max(self) -> int:
        return self.base + len(self.values) - 1


def _coefficient_terms(kernel: TransitionKernel, base: int) -> Iterator[float]:
    """Yield F_n^(base) for n = base, base+1, ... lazily."""
    vals = [1.0]
    yield 1.0
    n = base + 1
    while True:
        if kernel.n_states is not None and n >= kernel.n_states:
            return
        pref = kernel.prefix_weights(n)[base:]
        f = float(pref @ np.asarray(vals)) / kernel.up_weight(n)
        vals.append(f)
        yield f
        n += 1


def upward_coefficient_table(kernel: TransitionKernel, base: int,
                             n_max: int) -> UpwardCoefficientTable:
    """Coefficients F_n^(base) for n = base..n_max."""
    _require_upward(kernel)
    if base < 0 or n_max < base:
        raise ValueError("need 0 <= base <= n_max")
    out = np.empty(n_max - base + 1)
    gen = _coefficient_terms(kernel, base)
    for idx in range(n_max - base + 1):
        out[idx] = next(gen)
    return UpwardCoefficientTable(base=base, values=out)


def coefficient_triangle(kernel: TransitionKernel, n_max: int) -> np.ndarray:
    """All coefficients at once: tri[b, n] = F_n^(b) for b <= n <= n_max.

    Column n is one matrix-vector product with the prefix masses of row n,
    so the full triangle costs O(n_max^3) flops in vectorized form.
    """
    _require_upward(kernel)
    tri = np.zeros((n_max + 1, n_max + 1))
    tri[0, 0] = 1.0
    for n in range(1, n_max + 1):
        pref = kernel.prefix_weights(n)
        tri[:n, n] = (tri[:n, :n] @ pref) / kernel.up_weight(n)
        tri[n, n] = 1.0
    return tri


def weighted_cost_sum(kernel: TransitionKernel, cost: CostFunction, n: int,
                      base: int = 0,
                      triangle: Optional[np.ndarray] = None) -> float:
    """sum_{k=base}^{n} F_n^(k) c(k) / P(k, k+1), from the definition.

    Pass a precomputed `coefficient_triangle` covering n to amortize.
    """
    _require_upward(kernel)
    if not 0 <= base <= n:
        raise ValueError("need 0 <= base <= n")
    if triangle is None:
        triangle = coefficient_triangle(kernel, n)
    w = np.array([cost(k) / kernel.up_weight(k) for k in range(base, n + 1)])
    return float(triangle[base: n + 1, n] @ w)


def _t_terms(kernel: TransitionKernel, cost: CostFunction,
             base: int = 0) -> Iterator[float]:
    """Yield the cost-weighted sums t_base, t_base+1, ... via the forward
    recursion t_m = (sum_{k=base..m-1} P_m^(k-) t_k + c(m)) / P(m, m+1)."""
    ts: list[float] = []
    m = base
    while True:
        if kernel.n_states is not None and m >= kernel.n_states:
            return
        if kernel.n_states is not None and m == kernel.n_states - 1:
            # last row of a finite chain has no upward step; the potential
            # series is a finite sum ending here only when the row's cost
            # and inflow vanish, which irreducible stochastic chains never
            # satisfy with nonzero cost
            pref = kernel.prefix_weights(m)[base:]
            inflow = float(pref @ np.asarray(ts)) + cost(m)
            if inflow > 0.0:
                yield math.inf
            return
        if m == base:
            t = cost(m) / kernel.up_weight(m)
        else:
            pref = kernel.prefix_weights(m)[base:]
            t = (float(pref @ np.asarray(ts)) + cost(m)) / kernel.up_weight(m)
        ts.append(t)
        yield t
        m += 1


def weighted_cost_sum_by_recursion(kernel: TransitionKernel, cost: CostFunction,
                                   n: int, base: int = 0) -> float:
    """Same sum by the forward recursion; agrees with `weighted_cost_sum`."""
    _require_upward(kernel)
    if not 0 <= base <= n:
        raise ValueError("need 0 <= base <= n")
    gen = _t_terms(kernel, cost, base)
    t = 0.0
    for _ in range(n - base + 1):
        t = next(gen)
    return t


def potential_upward(kernel: TransitionKernel, cost: CostFunction,
                     states: Sequence[int],
                     policy: SeriesPolicy = DEFAULT_POLICY) -> PotentialResult:
    """Potentials at the given states via tail sums of the t-recursion.

    Every requested state shares one t-series: potential(i) is the tail from
    m = i.  The series is stopped relative to the tail of the *largest*
    requested state, which is the smallest of the tails, so each value meets
    the relative tolerance.
    """
    _require_upward(kernel)
    targets = tuple(int(s) for s in states)
    if not targets or min(targets) < 0:
        raise ValueError("need at least one nonnegative state")
    i_top = max(targets)
    gen = _t_terms(kernel, cost)
    head: list[float] = []
    for _ in range(i_top):
        try:
            head.append(next(gen))
        except StopIteration:
            break
    if len(head) == i_top and not any(math.isinf(t) for t in head):
        tail = _sum_terms(gen, policy)
    else:
        # finite chain ended early or produced an infinite term
        if any(math.isinf(t) for t in head):
            tail = ConvergentValue(math.inf, Status.DIVERGED, len(head), math.inf)
        else:
            tail = ConvergentValue(0.0, Status.CONVERGED, 0, 0.0)
    values = np.empty(len(targets))
    for idx, i in enumerate(targets):
        seg = math.fsum(head[i:]) if i < len(head) else 0.0
        values[idx] = seg + tail.value
    return PotentialResult(states=targets, values=values, status=tail.status,
                           terms_used=len(head) + tail.terms_used,
                           last_increment=tail.last_increment)


def _sum_terms(gen: Iterator[float], policy: SeriesPolicy) -> ConvergentValue:
    def guarded() -> Iterator[float]:
        for t in gen:
            if math.isinf(t):
                yield policy.divergence_cap * 2.0
                return
            yield t

    return sum_nonnegative_series(guarded(), policy)


def green_upward(kernel: TransitionKernel, rows: Sequence[int],
                 cols: Sequence[int],
                 policy: SeriesPolicy = DEFAULT_POLICY) -> GreenResult:
    """Green-matrix block: expected visits to each col state from each row
    state, via tail sums of the visit coefficients."""
    _require_upward(kernel)
    rows_t = tuple(int(r) for r in rows)
    cols_t = tuple(int(c) for c in cols)
    if not rows_t or not cols_t or min(rows_t + cols_t) < 0:
        raise ValueError("need nonnegative row and column states")
    r_top = max(rows_t)
    out = np.empty((len(rows_t), len(cols_t)))
    worst = Status.CONVERGED
    terms_total = 0
    for cj, j in enumerate(cols_t):
        upj = kernel.up_weight(j)
        gen = _coefficient_terms(kernel, j)
        m_hi = max(r_top, j)
        head: list[float] = []
        for _ in range(m_hi - j):
            try:
                head.append(next(gen))
            except StopIteration:
                break
        if len(head) == m_hi - j:
            tail = _sum_terms(gen, policy)
        else:
            tail = ConvergentValue(0.0, Status.CONVERGED, 0, 0.0)
        terms_total = max(terms_total, len(head) + tail.terms_used)
        worst = worse_status(worst, tail.status)
        for ri, i in enumerate(rows_t):
            lo = max(i, j)
            seg = math.fsum(head[lo - j:]) if lo - j < len(head) else 0.0
            out[ri, cj] = (seg + tail.value) / upj
    return GreenResult(rows=rows_t, cols=cols_t, matrix=out, status=worst,
                       terms_used=terms_total)


def classify_upward(kernel: TransitionKernel,
                    policy: Optional[SeriesPolicy] = None,
                    cap: int = 4000) -> Classification:
    """Transience test: the chain is transient iff sum_n F_n^(0) is finite.

    A convergent sum gives Transient, a sum crossing the divergence cap
    gives Recurrent.  If the index cap is reached first, the terms are
    compared across the final doubling: terms that have failed to shrink by
    at least 10% mark Recurrent, anything else is left Unknown.
    """
    _require_upward(kernel)
    if kernel.n_states is not None:
        raise CapabilityError("classification applies to infinite chains")
    pol = policy or SeriesPolicy(index_cap=cap)
    pol = SeriesPolicy(pol.tol, pol.consecutive, pol.divergence_cap,
                       min(pol.index_cap, cap))
    terms: list[float] = []

    def record() -> Iterator[float]:
        for f in _coefficient_terms(kernel, 0):
            terms.append(f)
            yield f

    res = sum_nonnegative_series(record(), pol)
    if res.status is Status.CONVERGED:
        return Classification(ChainClass.TRANSIENT, res,
                              "visit coefficient sum converged")
    if res.status is Status.DIVERGED:
        return Classification(
            ChainClass.RECURRENT,
            ConvergentValue(math.inf, Status.DIVERGED, res.terms_used,
                            res.last_increment),
            "visit coefficient sum crossed the divergence cap")
    n = len(terms)
    if n >= 8 and terms[n - 1] >= 0.9 * terms[n // 2]:
        return Classification(
            ChainClass.RECURRENT,
            ConvergentValue(math.inf, Status.DIVERGED, n, terms[-1]),
            "visit coefficients not decaying across a doubling of the index")
    return Classification(ChainClass.UNKNOWN, res,
                          "index cap reached without a verdict")
