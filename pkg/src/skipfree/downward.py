"""Closed-form recursions for downward skip-free chains.

A chain that can fall at most one level per step reaches 0 from above only
through every intermediate level.  With tail masses P_m^(k+) = sum_{j >= k}
P(m, j), the coefficients

    H_i^(i) = 1,
    H_m^(i) = (1/P(m, m-1)) * sum_{k=m+1}^{i} P_m^(k+) H_k^(i)   (1 <= m < i)

run a backward recursion from the target i; they relate visit counts across
levels on the way down.  The potential has the form

    potential(i) = delta * M(i) - sum_{m>i} sum_{k>=m} H_m^(k) c(k)/P(k,k-1)

where delta folds the cost into an origin-weighted double series and M(i),
the expected number of visits to the origin, is the limit of a ratio of
H-sums over growing horizons.  The chain is transient exactly when M(0) is
finite, which doubles as the classification criterion.

The double series are evaluated inner-first with the inner tolerance ten
times tighter than the outer one; H-tables, being cost-independent, are
cached per engine.  The subtraction in the potential is the one place the theory
itself cancels: when the subtrahend exceeds 90% of delta*M(i) both sides
are recomputed a hundred times tighter before subtracting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

from .chain import (CapabilityError, ChainClass, Classification, ConvergentValue,
                    CostFunction, GeneratorKernel, GreenResult, PotentialResult,
                    Status, Structure, TransitionKernel, worse_status)
from .series import DEFAULT_POLICY, SeriesPolicy, stabilize_sequence, \
    sum_nonnegative_series

__all__ = [
    "DownwardCoefficientTable", "DownwardEngine", "RatioLimit",
    "downward_coefficient_table", "tail_cost_sum", "tail_cost_sum_by_recursion",
    "origin_cost_weight", "visits_to_origin", "potential_downward",
    "green_downward", "classify_downward", "coefficient_extension_residual",
]

Kernel = Union[TransitionKernel, GeneratorKernel]

_BIG = 2.0 ** 800
_SHIFT = 1600


def _require_downward(kernel: Kernel) -> None:
    if Structure.DOWNWARD_SKIP_FREE not in kernel.structure:
        raise CapabilityError(
            f"{kernel.label}: downward recursions need a downward skip-free kernel")
    if not kernel.has_tail_capability:
        raise CapabilityError(
            f"{kernel.label}: downward recursions need tail sums (finite row "
            "support or an analytic tail oracle)")


def _ldexp(x: float, e: int) -> float:
    if x == 0.0 or e == 0:
        return x
    try:
        return math.ldexp(x, e)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class DownwardCoefficientTable:
    """Coefficients H_m^(target) for m = 1..target (true, unscaled values)."""

    target: int
    values: np.ndarray  # values[m - 1] = H_m^(target)

    def __getitem__(self, m: int) -> float:
        if m == self.target:
            return 1.0
        if not 1 <= m <= self.target:
            raise IndexError(f"coefficient defined for 1 <= m <= {self.target}")
        return float(self.values[m - 1])


@dataclass(frozen=True)
class RatioLimit:
    """Sampled origin-visit ratios across horizons, with their limit."""

    state: int
    horizons: tuple[int, ...]
    ratios: tuple[float, ...]
    verdict: ConvergentValue


class DownwardEngine:
    """Shared caches for one downward kernel.

    Holds the per-target coefficient tables in scaled form (values times
    2**-exp, rescaled whenever the backward recursion grows past float
    range; every consumer either recombines with ldexp or takes a ratio in
    which the scale cancels), the origin tail masses, and the down-step
    weights.  Tables are cost-independent, so one engine serves any number
    of potential/Green/classification queries on the same kernel.
    """

    def __init__(self, kernel: Kernel):
        _require_downward(kernel)
        self.kernel = kernel
        self._tables: dict[int, tuple[np.ndarray, int]] = {}
        self._down: dict[int, float] = {}
        self._origin = np.zeros(0)

    def down(self, k: int) -> float:
        w = self._down.get(k)
        if w is None:
            w = self.kernel.down_weight(k)
            self._down[k] = w
        return w

    def origin_tails(self, k_hi: int) -> np.ndarray:
        """Masses at or above k from state 0, for k = 1..k_hi."""
        if len(self._origin) < k_hi:
            grow = max(k_hi, 2 * len(self._origin), 32)
            if self.kernel.n_states is not None:
                grow = min(grow, self.kernel.n_states - 1)
            self._origin = self.kernel.tail_weights(0, grow)
        return self._origin[:k_hi]

    def scaled_table(self, target: int) -> tuple[np.ndarray, int]:
        """(h, exp) with true H_m^(target) = h[m] * 2**exp, h indexed 0..target."""
        got = self._tables.get(target)
        if got is None:
            got = self._build(target)
            self._tables[target] = got
        return got

    def _build(self, target: int) -> tuple[np.ndarray, int]:
        if target < 1:
            raise ValueError("coefficient tables need target >= 1")
        if self.kernel.n_states is not None and target >= self.kernel.n_states:
            raise ValueError(f"target {target} outside the finite state space")
        h = np.zeros(target + 1)
        h[target] = 1.0
        exp = 0
        for m in range(target - 1, 0, -1):
            tails = self.kernel.tail_weights(m, target)
            v = float(tails @ h[m + 1: target + 1]) / self.down(m)
            if v > _BIG:
                h[m + 1:] = np.ldexp(h[m + 1:], -_SHIFT)
                exp += _SHIFT
                v = math.ldexp(v, -_SHIFT)
            h[m] = v
        return h, exp

    def coefficient(self, m: int, target: int) -> float:
        """True H_m^(target); inf if it exceeds float range."""
        if m == target:
            return 1.0
        h, exp = self.scaled_table(target)
        return _ldexp(float(h[m]), exp)


def downward_coefficient_table(kernel: Kernel, target: int,
                               engine: Optional[DownwardEngine] = None
                               ) -> DownwardCoefficientTable:
    """Coefficients H_m^(target) for m = 1..target."""
    eng = engine or DownwardEngine(kernel)
    h, exp = eng.scaled_table(target)
    vals = np.array([_ldexp(float(h[m]), exp) for m in range(1, target + 1)])
    return DownwardCoefficientTable(target=target, values=vals)


def tail_cost_sum(kernel: Kernel, cost: CostFunction, i: int, n: int,
                  engine: Optional[DownwardEngine] = None) -> float:
    """sum_{k=i}^{n} H_i^(k) c(k) / P(k, k-1), from the definition."""
    eng = engine or DownwardEngine(kernel)
    if not 1 <= i <= n:
        raise ValueError("need 1 <= i <= n")
    total = 0.0
    for k in range(i, n + 1):
        ck = cost(k)
        if ck != 0.0:
            total += eng.coefficient(i, k) * ck / eng.down(k)
    return total


def tail_cost_sum_by_recursion(kernel: Kernel, cost: CostFunction,
                               i: int, n: int) -> float:
    """Same sum by the backward recursion
    h(n+1) = 0, h(j) = (sum_{k=j+1}^{n} P_j^(k+) h(k) + c(j)) / P(j, j-1)."""
    _require_downward(kernel)
    if not 1 <= i <= n:
        raise ValueError("need 1 <= i <= n")
    h = np.zeros(n + 2)
    for j in range(n, i - 1, -1):
        acc = cost(j)
        if j < n:
            tails = kernel.tail_weights(j, n)
            acc += float(tails @ h[j + 1: n + 1])
        h[j] = acc / kernel.down_weight(j)
    return float(h[i])


# -- double series ------------------------------------------------------------


def _inner_tail(eng: DownwardEngine, cost: CostFunction, m: int,
                pol: SeriesPolicy,
                cache: dict[int, tuple[float, ConvergentValue]]) -> ConvergentValue:
    """I(m) = sum_{k>=m} H_m^(k) c(k) / P(k, k-1) under the series policy."""
    hit = cache.get(m)
    if hit is not None and hit[0] <= pol.tol:
        return hit[1]

    def terms() -> Iterator[float]:
        k = m
        while True:
            if eng.kernel.n_states is not None and k >= eng.kernel.n_states:
                return
            ck = cost(k)
            if ck == 0.0:
                yield 0.0
            elif k == m:
                yield ck / eng.down(k)
            else:
                h, exp = eng.scaled_table(k)
                yield _ldexp(float(h[m]) * ck / eng.down(k), exp)
            k += 1

    cv = sum_nonnegative_series(terms(), pol)
    cache[m] = (pol.tol, cv)
    return cv


def _double_tail(eng: DownwardEngine, cost: CostFunction, first_m: int,
                 pol: SeriesPolicy,
                 cache: dict[int, tuple[float, ConvergentValue]],
                 extra: float = 0.0,
                 origin_weighted: bool = False) -> ConvergentValue:
    """Outer series sum_{m>=first_m} w_m I(m) (+ extra), with w_m the origin
    tail mass when ``origin_weighted`` else 1."""
    inner_pol = pol.tighter(0.1)
    worst = [Status.CONVERGED]

    def terms() -> Iterator[float]:
        m = first_m
        while True:
            if eng.kernel.n_states is not None and m >= eng.kernel.n_states:
                return
            inner = _inner_tail(eng, cost, m, inner_pol, cache)
            worst[0] = worse_status(worst[0], inner.status)
            w = float(eng.origin_tails(m)[m - 1]) if origin_weighted else 1.0
            yield w * inner.value
            m += 1

    out = sum_nonnegative_series(terms(), pol, start=extra)
    status = worse_status(out.status, worst[0])
    if status is out.status:
        return out
    return ConvergentValue(out.value, status, out.terms_used, out.last_increment)


def origin_cost_weight(kernel: Kernel, cost: CostFunction,
                       policy: SeriesPolicy = DEFAULT_POLICY,
                       engine: Optional[DownwardEngine] = None,
                       _cache: Optional[dict] = None) -> ConvergentValue:
    """delta = c(0) + sum_{m>=1} P_0^(m+) * I(m), the origin-weighted total
    cost functional of the downward potential formula."""
    eng = engine or DownwardEngine(kernel)
    cache = _cache if _cache is not None else {}
    return _double_tail(eng, cost, 1, policy, cache,
                        extra=cost(0), origin_weighted=True)


def visits_to_origin(kernel: Kernel, i: int,
                     policy: SeriesPolicy = DEFAULT_POLICY,
                     engine: Optional[DownwardEngine] = None,
                     horizons: Optional[Sequence[int]] = None) -> RatioLimit:
    """M(i): the limit of (sum_{m=i+1}^{n} H_m^(n)) / (sum_{k=1}^{n}
    P_0^(k+) H_k^(n)) over doubling horizons n.

    Finite for transient chains (it equals the expected number of visits to
    the origin, i.e. the Green entry G(i, 0)); divergence certifies
    recurrence.  Ratios that grow monotonically without decaying increments
    across the final doublings are certified divergent even before crossing
    the cap.
    """
    eng = engine or DownwardEngine(kernel)
    if i < 0:
        raise ValueError("state must be >= 0")
    if eng.kernel.n_states is not None:
        raise CapabilityError("the origin-visit ratio limit needs an infinite chain")
    if horizons is None:
        base = 16
        while base <= i + 1:
            base *= 2
        horizons = [base * 2 ** k for k in range(9)]
    recorded: list[tuple[int, float]] = []

    def ratio_at(n: int) -> float:
        h, _ = eng.scaled_table(n)
        num = float(h[i + 1:].sum())
        den = float(eng.origin_tails(n) @ h[1:])
        r = num / den if den > 0.0 else math.inf
        recorded.append((n, r))
        return r

    verdict = stabilize_sequence(ratio_at, list(horizons), policy)
    return RatioLimit(state=i,
                      horizons=tuple(n for n, _ in recorded),
                      ratios=tuple(r for _, r in recorded),
                      verdict=verdict)


def potential_downward(kernel: Kernel, cost: CostFunction,
                       states: Sequence[int],
                       policy: SeriesPolicy = DEFAULT_POLICY,
                       closed_m: Optional[Callable[[int], float]] = None,
                       engine: Optional[DownwardEngine] = None) -> PotentialResult:
    """Potentials at the given states via delta * M(i) minus the double tail.

    ``closed_m`` supplies analytic M(i) values for parametric models; by
    default M(i) is the stabilized numeric ratio.  The subtraction is
    guarded: if the subtrahend reaches 90% of delta*M(i), both sides are
    recomputed with tolerances tightened a hundredfold.
    """
    eng = engine or DownwardEngine(kernel)
    targets = tuple(int(s) for s in states)
    if not targets or min(targets) < 0:
        raise ValueError("need at least one nonnegative state")
    cache: dict[int, tuple[float, ConvergentValue]] = {}
    values = np.empty(len(targets))
    status = Status.CONVERGED
    terms_used = 0
    last_inc = 0.0

    if cost.is_zero:
        return PotentialResult(states=targets, values=np.zeros(len(targets)),
                               status=Status.CONVERGED, terms_used=0,
                               last_increment=0.0)

    def m_of(i: int, pol: SeriesPolicy) -> ConvergentValue:
        if closed_m is not None:
            return ConvergentValue(float(closed_m(i)), Status.CONVERGED, 0, 0.0)
        return visits_to_origin(kernel, i, pol, engine=eng).verdict

    deltas: dict[float, ConvergentValue] = {}

    def delta_of(pol: SeriesPolicy) -> ConvergentValue:
        got = deltas.get(pol.tol)
        if got is None:
            got = origin_cost_weight(kernel, cost, pol, engine=eng, _cache=cache)
            deltas[pol.tol] = got
        return got

    for idx, i in enumerate(targets):
        pol = policy
        for attempt in range(2):
            d = delta_of(pol)
            mi = m_of(i, pol)
            s = _double_tail(eng, cost, i + 1, pol, cache)
            for part in (d, mi, s):
                status = worse_status(status, part.status)
                terms_used = max(terms_used, part.terms_used)
                last_inc = max(last_inc, part.last_increment)
            if math.isinf(d.value) or (math.isinf(mi.value) and d.value > 0.0):
                values[idx] = math.inf
                break
            prod = d.value * mi.value if d.value > 0.0 else 0.0
            if math.isinf(s.value):
                # cannot happen for consistent inputs: the subtrahend is
                # bounded by delta * M(i)
                values[idx] = math.nan
                status = worse_status(status, Status.OSCILLATING)
                break
            if attempt == 0 and prod > 0.0 and s.value / prod > 0.9:
                pol = policy.tighter(0.01)
                continue
            values[idx] = max(0.0, prod - s.value)
            break
    return PotentialResult(states=targets, values=values, status=status,
                           terms_used=terms_used, last_increment=last_inc)


def green_downward(kernel: Kernel, rows: Sequence[int], cols: Sequence[int],
                   policy: SeriesPolicy = DEFAULT_POLICY,
                   closed_m: Optional[Callable[[int], float]] = None,
                   engine: Optional[DownwardEngine] = None) -> GreenResult:
    """Green-matrix block for a downward skip-free chain.

    Column 0 is M(i) itself; a column j >= 1 couples M(i) with finite
    H-sums at target j, minus a correction when the column lies above the
    row state.
    """
    eng = engine or DownwardEngine(kernel)
    rows_t = tuple(int(r) for r in rows)
    cols_t = tuple(int(c) for c in cols)
    if not rows_t or not cols_t or min(rows_t + cols_t) < 0:
        raise ValueError("need nonnegative row and column states")
    m_vals: dict[int, ConvergentValue] = {}
    status = Status.CONVERGED
    terms = 0
    for i in set(rows_t):
        if closed_m is not None:
            m_vals[i] = ConvergentValue(float(closed_m(i)), Status.CONVERGED, 0, 0.0)
        else:
            m_vals[i] = visits_to_origin(kernel, i, policy, engine=eng).verdict
        status = worse_status(status, m_vals[i].status)
        terms = max(terms, m_vals[i].terms_used)
    out = np.empty((len(rows_t), len(cols_t)))
    for cj, j in enumerate(cols_t):
        if j == 0:
            for ri, i in enumerate(rows_t):
                out[ri, cj] = m_vals[i].value
            continue
        h, exp = eng.scaled_table(j)
        dj = eng.down(j)
        base = _ldexp(float(eng.origin_tails(j) @ h[1: j + 1]) / dj, exp)
        for ri, i in enumerate(rows_t):
            v = m_vals[i].value * base
            if j > i:
                v -= _ldexp(float(h[i + 1: j + 1].sum()) / dj, exp)
            out[ri, cj] = max(0.0, v)
    return GreenResult(rows=rows_t, cols=cols_t, matrix=out, status=status,
                       terms_used=terms)


def classify_downward(kernel: Kernel,
                      policy: SeriesPolicy = DEFAULT_POLICY) -> Classification:
    """Transience test: the chain is transient iff M(0) is finite."""
    rl = visits_to_origin(kernel, 0, policy)
    v = rl.verdict
    if v.status is Status.CONVERGED:
        return Classification(ChainClass.TRANSIENT, v,
                              "origin-visit ratio converged")
    if v.status is Status.DIVERGED:
        return Classification(ChainClass.RECURRENT, v,
                              "origin-visit ratio diverged")
    return Classification(ChainClass.UNKNOWN, v,
                          "origin-visit ratio undecided at the horizon cap")


def coefficient_extension_residual(kernel: Kernel, i: int, n: int,
                                   engine: Optional[DownwardEngine] = None
                                   ) -> float:
    """Relative gap in the horizon-extension identity
    sum_{k=i}^{n} H_i^(k) P_k^((n+1)+) / P(k, k-1) = H_i^(n+1).

    Zero (to rounding) for every downward skip-free kernel; exposed because
    it exercises every table entry and tail mass at once, which makes it a
    sharp end-to-end consistency check.
    """
    eng = engine or DownwardEngine(kernel)
    if not 1 <= i <= n:
        raise ValueError("need 1 <= i <= n")
    acc = 0.0
    for k in range(i, n + 1):
        acc += eng.coefficient(i, k) * kernel.tail_sum(k, n + 1) / eng.down(k)
    target = eng.coefficient(i, n + 1)
    return abs(acc - target) / max(abs(target), 1e-300)
