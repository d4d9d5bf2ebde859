"""Potentials for continuous-time skip-free chains.

Every discrete-time solver in this package carries over to a conservative
generator Q with the same shape of recursion: prefix/tail rate masses take
the place of probability masses and the level-crossing rate Q(n, n+1) or
Q(n, n-1) takes the place of the crossing probability.  The holding-time
normalization cancels inside the coefficient recursions, so the upward and
downward engines accept a `GeneratorKernel` directly; the thin wrappers
here only make that contract explicit.

Two independent routes are specific to continuous time:

* truncation in rate space: the northwest corner of -Q is solved by the
  same subtraction-free censoring fold, feeding it off-diagonal rates and
  the cut rate mass as leak;
* embedding: the jump chain P(i, j) = Q(i, j)/|Q(i, i)| with the cost
  rescaled by expected holding times, c(i)/|Q(i, i)|, has exactly the
  time-integral potential of the original process.

Birth-death generators additionally admit a direct stationary-weight
formula, evaluated by a ratio recursion that never forms the (possibly
astronomically large or tiny) weights themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .chain import (CapabilityError, Classification, CostFunction,
                    GeneratorKernel, GreenResult, PotentialResult, Status,
                    Structure, TransitionKernel, TruncatedChain)
from .downward import (DownwardEngine, classify_downward, green_downward,
                       potential_downward)
from .series import DEFAULT_POLICY, SeriesPolicy, sum_nonnegative_series
from .truncation import (DEFAULT_LEVELS, SweepResult, TruncatedSolution,
                         _run_sweep, _usable_levels, northwest_truncate,
                         solve_substochastic)
from .upward import classify_upward, green_upward, potential_upward

__all__ = [
    "EmbeddedChain", "embed", "truncate_generator", "ctmc_truncated_potential",
    "ctmc_potential_sweep", "ctmc_green_sweep", "potential_upward_ct",
    "green_upward_ct", "potential_downward_ct", "green_downward_ct",
    "classify_ct", "birth_death_potential",
]


@dataclass(frozen=True)
class EmbeddedChain:
    """Jump chain plus holding-time-weighted cost of a CTMC.

    The discrete-time potential of ``kernel`` under ``cost`` equals the
    time-integral potential of the original generator, so any solver in
    this package applied to the pair reproduces it exactly.
    """

    kernel: TransitionKernel
    cost: CostFunction


def embed(gen: GeneratorKernel, cost: CostFunction) -> EmbeddedChain:
    """Embedded jump chain P(i,j) = Q(i,j)/|Q(i,i)| with cost c(i)/|Q(i,i)|.

    Raises `StructureViolation` on a nonnegative diagonal entry (an
    absorbing state has no jump chain row).  Structure tags, finite size,
    and any tail oracle carry over, rescaled.
    """

    def row_builder(i: int, j_max: int) -> np.ndarray:
        out = gen.out_rate(i)
        row = gen.dense_row(i, j_max) / out
        if i <= j_max:
            row[i] = 0.0
        return row

    tail = None
    if gen.tail_oracle is not None:
        def tail(m: int, ks: np.ndarray) -> np.ndarray:
            return np.asarray(gen.tail_oracle(m, ks), dtype=float) / gen.out_rate(m)

    kernel = TransitionKernel(
        structure=gen.structure,
        n_states=gen.n_states,
        row_builder=row_builder,
        support_end=gen.support_end,
        tail_oracle=tail,
        label=f"{gen.label} (embedded)",
    )
    kind = "zero" if cost.is_zero else "embedded"
    emb_cost = CostFunction(lambda i: cost(i) / gen.out_rate(i),
                            kind=kind, params=(cost.kind, cost.params))
    return EmbeddedChain(kernel=kernel, cost=emb_cost)


# -- truncation in rate space --------------------------------------------------


def truncate_generator(gen: GeneratorKernel, n: int) -> TruncatedChain:
    """Corner 0..n of the generator plus the cut rate mass per row."""
    return northwest_truncate(gen, n)


def ctmc_truncated_potential(gen: GeneratorKernel, cost: CostFunction,
                             n: int) -> TruncatedSolution:
    """Solve the corner system (-Q_n) psi = c without subtraction.

    The censoring fold receives off-diagonal rates with the cut rate mass
    as leak; its pivots rebuild each |Q(k, k)| from nonnegative parts.  The
    reported residual is max_i |sum_j (-Q(i,j)) psi(j) - c(i)| on the
    corner.
    """
    trunc = truncate_generator(gen, n)
    c = cost.values(n)
    psi = solve_substochastic(trunc.matrix, trunc.leak, c, trunc.source_structure)
    out_rate = -np.diagonal(trunc.matrix)
    off = trunc.matrix.copy()
    np.fill_diagonal(off, 0.0)
    residual = float(np.max(np.abs(out_rate * psi - off @ psi - c)))
    return TruncatedSolution(n=n, phi=psi, residual=residual)


def ctmc_potential_sweep(gen: GeneratorKernel, cost: CostFunction,
                         states: Sequence[int],
                         levels: Sequence[int] = DEFAULT_LEVELS,
                         tol: float = 1e-10,
                         stop_early: bool = True,
                         cap: float = 1e12) -> SweepResult:
    """Truncated CT potentials at the given states across increasing levels."""
    targets = tuple(int(s) for s in states)
    if not targets:
        raise ValueError("need at least one state")
    lv = _usable_levels(gen, levels, max(targets))

    def evaluate(n: int) -> np.ndarray:
        sol = ctmc_truncated_potential(gen, cost, n)
        return sol.phi[list(targets)]

    used, table, gap, status = _run_sweep(evaluate, lv, tol, stop_early, cap)
    return SweepResult(targets=targets, levels=tuple(used), table=table,
                       gap=gap, status=status, tol=tol)


def ctmc_green_sweep(gen: GeneratorKernel,
                     entries: Sequence[tuple[int, int]],
                     levels: Sequence[int] = DEFAULT_LEVELS,
                     tol: float = 1e-10,
                     stop_early: bool = True,
                     cap: float = 1e12) -> SweepResult:
    """Truncated expected-time Green entries across increasing levels."""
    targets = tuple((int(i), int(j)) for i, j in entries)
    if not targets:
        raise ValueError("need at least one (row, col) entry")
    needed = max(max(i, j) for i, j in targets)
    lv = _usable_levels(gen, levels, needed)

    def evaluate(n: int) -> np.ndarray:
        trunc = truncate_generator(gen, n)
        G = solve_substochastic(trunc.matrix, trunc.leak, np.eye(n + 1),
                                trunc.source_structure)
        return np.array([G[i, j] for i, j in targets])

    used, table, gap, status = _run_sweep(evaluate, lv, tol, stop_early, cap)
    return SweepResult(targets=targets, levels=tuple(used), table=table,
                       gap=gap, status=status, tol=tol)


# -- closed-form recursions, continuous time -----------------------------------
#
# The generator enters the same engines as a transition kernel: prefix and
# tail masses become rate masses and every up/down weight becomes a rate.
# Holding times cancel in the coefficient recursions and reappear exactly
# where they belong, in the cost-over-crossing-rate terms.


def potential_upward_ct(gen: GeneratorKernel, cost: CostFunction,
                        states: Sequence[int],
                        policy: SeriesPolicy = DEFAULT_POLICY) -> PotentialResult:
    """Time-integral potentials of an upward skip-free generator."""
    return potential_upward(gen, cost, states, policy)


def green_upward_ct(gen: GeneratorKernel, rows: Sequence[int],
                    cols: Sequence[int],
                    policy: SeriesPolicy = DEFAULT_POLICY) -> GreenResult:
    """Expected-time Green block of an upward skip-free generator."""
    return green_upward(gen, rows, cols, policy)


def potential_downward_ct(gen: GeneratorKernel, cost: CostFunction,
                          states: Sequence[int],
                          policy: SeriesPolicy = DEFAULT_POLICY,
                          closed_m: Optional[Callable[[int], float]] = None,
                          engine: Optional[DownwardEngine] = None
                          ) -> PotentialResult:
    """Time-integral potentials of a downward skip-free generator."""
    return potential_downward(gen, cost, states, policy,
                              closed_m=closed_m, engine=engine)


def green_downward_ct(gen: GeneratorKernel, rows: Sequence[int],
                      cols: Sequence[int],
                      policy: SeriesPolicy = DEFAULT_POLICY,
                      closed_m: Optional[Callable[[int], float]] = None,
                      engine: Optional[DownwardEngine] = None) -> GreenResult:
    """Expected-time Green block of a downward skip-free generator."""
    return green_downward(gen, rows, cols, policy,
                          closed_m=closed_m, engine=engine)


def classify_ct(gen: GeneratorKernel,
                policy: SeriesPolicy = DEFAULT_POLICY) -> Classification:
    """Transient/recurrent verdict for a skip-free generator.

    A conservative, non-explosive CTMC shares its class with its jump
    chain, and the classification series built from rate masses coincides
    with the jump chain's, so the discrete-time classifiers apply as is.
    """
    if Structure.UPWARD_SKIP_FREE in gen.structure:
        return classify_upward(gen, policy)
    if Structure.DOWNWARD_SKIP_FREE in gen.structure:
        return classify_downward(gen, policy)
    raise CapabilityError(
        f"{gen.label}: classification needs a skip-free structure tag")


# -- birth-death fast path -----------------------------------------------------


def _birth_death_terms(gen: GeneratorKernel,
                       cost: CostFunction) -> Iterator[float]:
    """Terms t_m of psi(i) = sum_{m >= i} t_m for a birth-death generator.

    With stationary weights pi(0) = 1, pi(k) = prod birth(j-1)/death(j),
    the potential term at level m is sum_{k <= m} pi(k) c(k) divided by
    birth(m) pi(m).  The running quantity S_m = sum_{k<=m} pi(k)c(k)/pi(m)
    obeys S_m = S_{m-1} death(m)/birth(m-1) + c(m), which stays in float
    range whenever the terms themselves do.
    """
    S = cost(0)
    m = 0
    while True:
        if gen.n_states is not None and m == gen.n_states - 1:
            # the top state of a conservative finite chain has no upward
            # rate: any cost mass reaching it makes the potential infinite
            if S > 0.0:
                yield math.inf
            return
        b = gen.up_weight(m)
        yield S / b
        m += 1
        S = S * gen.down_weight(m) / b + cost(m)


def birth_death_potential(gen: GeneratorKernel, cost: CostFunction,
                          states: Sequence[int],
                          policy: SeriesPolicy = DEFAULT_POLICY
                          ) -> PotentialResult:
    """Potentials of a birth-death generator by the stationary-weight sums.

    Independent of the skip-free recursions: a direct evaluation available
    whenever the generator is tridiagonal, mainly useful as a cross-check.
    """
    if (Structure.UPWARD_SKIP_FREE not in gen.structure
            or Structure.DOWNWARD_SKIP_FREE not in gen.structure):
        raise CapabilityError(
            f"{gen.label}: the stationary-weight formula needs a tridiagonal "
            "(birth-death) generator")
    targets = tuple(int(s) for s in states)
    if not targets or min(targets) < 0:
        raise ValueError("need at least one nonnegative state")
    i_top = max(targets)
    if gen.n_states is not None and i_top >= gen.n_states:
        raise ValueError(f"state {i_top} outside the state space")
    terms = _birth_death_terms(gen, cost)
    head: list[float] = []
    for _ in range(i_top):
        try:
            head.append(next(terms))
        except StopIteration:
            break
    tail = sum_nonnegative_series(terms, policy)
    status = tail.status
    values = np.empty(len(targets))
    for idx, i in enumerate(targets):
        v = math.fsum(head[i:]) + tail.value
        if math.isinf(v):
            status = Status.DIVERGED
        values[idx] = v
    return PotentialResult(states=targets, values=values, status=status,
                           terms_used=len(head) + tail.terms_used,
                           last_increment=tail.last_increment)
