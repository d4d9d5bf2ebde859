"""Stabilized summation of nonnegative series and sequence limits.

Every infinite sum in this package runs through `sum_nonnegative_series`, and
every sequence limit (ratio-of-sums style) through `stabilize_sequence`, so
the stopping rules live in exactly one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .chain import ConvergentValue, Status

TINY = 2.2250738585072014e-308  # smallest positive normal double


@dataclass(frozen=True)
class SeriesPolicy:
    """Stopping rules shared by all series evaluations.

    tol : relative tolerance on increments.
    consecutive : how many successive small increments are required before
        declaring convergence (guards against terms that dip and rebound).
    divergence_cap : partial sums beyond this are declared divergent.
    index_cap : hard ceiling on the number of terms.
    """

    tol: float = 1e-10
    consecutive: int = 5
    divergence_cap: float = 1e12
    index_cap: int = 100_000

    def tighter(self, factor: float) -> "SeriesPolicy":
        return SeriesPolicy(self.tol * factor, self.consecutive,
                            self.divergence_cap, self.index_cap)


DEFAULT_POLICY = SeriesPolicy()


class CompensatedSum:
    """Kahan compensated accumulator."""

    __slots__ = ("total", "_c")

    def __init__(self, start: float = 0.0):
        self.total = float(start)
        self._c = 0.0

    def add(self, x: float) -> float:
        y = x - self._c
        t = self.total + y
        self._c = (t - self.total) - y
        self.total = t
        return t


def sum_nonnegative_series(terms: Iterable[float],
                           policy: SeriesPolicy = DEFAULT_POLICY,
                           start: float = 0.0) -> ConvergentValue:
    """Sum a nonnegative series until its terms are relatively negligible.

    A term t is small when t <= tol * max(partial_sum, tiny); `consecutive`
    successive small terms stop the sum.  The floor uses the smallest normal
    double rather than 1.0 so that series with tiny limits still meet a
    *relative* tolerance.  Partial sums above ``divergence_cap`` yield
    DIVERGED with value ``inf``; exhausting ``index_cap`` (or the iterator,
    without a small-term streak) yields INDEX_CAP_REACHED with the partial
    sum as a best-effort value.
    """
    acc = CompensatedSum(start)
    small_streak = 0
    n_used = 0
    last = 0.0
    for term in terms:
        t = float(term)
        if t < 0.0 or math.isnan(t):
            raise ValueError(f"series term must be >= 0, got {t}")
        acc.add(t)
        n_used += 1
        last = t
        if acc.total > policy.divergence_cap:
            return ConvergentValue(math.inf, Status.DIVERGED, n_used, t)
        if t <= policy.tol * max(acc.total, TINY):
            small_streak += 1
            if small_streak >= policy.consecutive:
                return ConvergentValue(acc.total, Status.CONVERGED, n_used, t)
        else:
            small_streak = 0
        if n_used >= policy.index_cap:
            break
    if small_streak >= policy.consecutive:
        return ConvergentValue(acc.total, Status.CONVERGED, n_used, last)
    if n_used < policy.index_cap:
        # iterator ran dry: a finite sum is exact
        return ConvergentValue(acc.total, Status.CONVERGED, n_used, last)
    return ConvergentValue(acc.total, Status.INDEX_CAP_REACHED, n_used, last)


def certify_growth(samples: list[float]) -> bool:
    """True when successive samples look like certified unbounded growth.

    ``samples`` are sequence values at doubling horizons.  Growth is
    certified when the values increase monotonically and the increments
    themselves fail to decay: each increment at least 0.9 times the previous
    one across the final three doublings.  A sequence converging like
    C - a/n has increment ratios near 0.5 on a doubling schedule, far from
    the 0.9 bar; a divergent sequence with linearly growing values has
    ratios near 1.
    """
    if len(samples) < 4:
        return False
    incs = [b - a for a, b in zip(samples, samples[1:])]
    tail = incs[-3:]
    if any(d <= 0.0 for d in tail):
        return False
    return all(b >= 0.9 * a for a, b in zip(tail, tail[1:]))


def stabilize_sequence(evaluate: Callable[[int], float],
                       horizons: Optional[list[int]] = None,
                       policy: SeriesPolicy = DEFAULT_POLICY) -> ConvergentValue:
    """Limit of a sequence sampled on doubling horizons.

    ``evaluate(n)`` returns the sequence value at horizon n.  Convergence is
    declared when successive samples agree to relative tolerance; certified
    growth (see `certify_growth`) or a value beyond ``divergence_cap``
    gives DIVERGED; otherwise INDEX_CAP_REACHED with the last sample.
    """
    if horizons is None:
        horizons = [16 * 2 ** k for k in range(9)]  # 16 .. 4096
    samples: list[float] = []
    prev: Optional[float] = None
    gap = math.inf
    for n in horizons:
        v = evaluate(n)
        if math.isnan(v):
            return ConvergentValue(math.nan, Status.OSCILLATING, n, gap)
        samples.append(v)
        if math.isinf(v) or v > policy.divergence_cap:
            return ConvergentValue(math.inf, Status.DIVERGED, n, math.inf)
        if prev is not None:
            gap = abs(v - prev)
            if gap <= policy.tol * max(abs(v), TINY):
                return ConvergentValue(v, Status.CONVERGED, n, gap)
        prev = v
    if certify_growth(samples):
        return ConvergentValue(math.inf, Status.DIVERGED, horizons[-1], gap)
    return ConvergentValue(samples[-1], Status.INDEX_CAP_REACHED, horizons[-1], gap)
