"""Monte Carlo estimation of potentials on truncated chains.

Paths run on a northwest corner: leaving the corner (the per-row leak)
absorbs the path, and the accumulated running cost of one path is one
replication.  The estimator is the plain mean with its standard error, so
any solver claiming the same quantity can be checked against mean +/- a few
standard errors.

Replications are independent by construction: the generator is a counter
RNG (splitmix64), and replication r draws from its own stream whose start
state is a 64-bit hash of (seed, r).  That keeps the kernels embarrassingly
parallel -- no shared generator state -- and makes every estimate
reproducible from (seed, replications) alone regardless of thread count.

Set SKIPFREE_THREADS to pin the numba thread pool (0 or unset picks the
default).  A replication that exceeds ``step_cap`` steps aborts the whole
estimate with an error: potentials of corners that practically never
absorb cannot be estimated this way, only diagnosed.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np

from .chain import CostFunction, StructureViolation, TruncatedChain

__all__ = ["SimEstimate", "simulate_dtmc", "simulate_ctmc"]

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_REP_STRIDE = np.uint64(0xD1342543DE82EF95)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@numba.njit(cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def _pick(row, u):
    # first index with row[idx] > u (row is a nondecreasing cdf)
    lo = 0
    hi = len(row)
    while lo < hi:
        mid = (lo + hi) // 2
        if u < row[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@numba.njit(parallel=True, cache=True)
def _dtmc_kernel(cdf, c, start, reps, seed, step_cap):
    totals = np.empty(reps)
    bad = 0
    for r in numba.prange(reps):
        state = _mix(seed + _REP_STRIDE * np.uint64(r))
        s = start
        acc = 0.0
        steps = 0
        while True:
            acc += c[s]
            steps += 1
            if steps > step_cap:
                bad += 1
                acc = np.nan
                break
            state = state + _GAMMA
            u = np.float64(_mix(state) >> _S11) * _INV53
            row = cdf[s]
            if u >= row[len(row) - 1]:
                break
            s = _pick(row, u)
        totals[r] = acc
    return totals, bad


@numba.njit(parallel=True, cache=True)
def _ctmc_kernel(jump_cdf, out_rate, c, start, reps, seed, step_cap):
    totals = np.empty(reps)
    bad = 0
    for r in numba.prange(reps):
        state = _mix(seed + _REP_STRIDE * np.uint64(r))
        s = start
        acc = 0.0
        steps = 0
        while True:
            steps += 1
            if steps > step_cap:
                bad += 1
                acc = np.nan
                break
            state = state + _GAMMA
            u = np.float64(_mix(state) >> _S11) * _INV53
            acc += c[s] * (-math.log(1.0 - u) / out_rate[s])
            state = state + _GAMMA
            u = np.float64(_mix(state) >> _S11) * _INV53
            row = jump_cdf[s]
            if u >= row[len(row) - 1]:
                break
            s = _pick(row, u)
        totals[r] = acc
    return totals, bad


@dataclass(frozen=True)
class SimEstimate:
    """Sample mean of per-replication accumulated costs and its standard
    error (sample std over sqrt(replications))."""

    mean: float
    std_error: float
    replications: int
    seed: int

    def covers(self, value: float, width: float = 4.0) -> bool:
        """Whether ``value`` lies within mean +/- width * std_error."""
        return abs(value - self.mean) <= width * self.std_error


def _threads_from_env() -> None:
    raw = os.environ.get("SKIPFREE_THREADS", "").strip()
    if not raw:
        return
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"SKIPFREE_THREADS must be an integer, got {raw!r}")
    if k < 0:
        raise ValueError(f"SKIPFREE_THREADS must be >= 0, got {k}")
    if k > 0:
        # asking for more workers than the pool was sized for is not an
        # error, just a request the hardware cannot grant
        numba.set_num_threads(min(k, numba.config.NUMBA_NUM_THREADS))


def _estimate(totals: np.ndarray, bad: int, reps: int, seed: int,
              step_cap: int) -> SimEstimate:
    if bad:
        raise RuntimeError(
            f"{bad} replication(s) ran past {step_cap} steps without leaving "
            "the corner; this corner absorbs too slowly to simulate")
    mean = float(totals.mean())
    se = float(totals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.inf
    return SimEstimate(mean=mean, std_error=se, replications=reps, seed=seed)


def _check_args(trunc: TruncatedChain, start: int, reps: int) -> None:
    if not 0 <= start <= trunc.n:
        raise ValueError(f"start state {start} outside corner 0..{trunc.n}")
    if reps < 2:
        raise ValueError("need at least 2 replications for a standard error")


def simulate_dtmc(trunc: TruncatedChain, cost: CostFunction, start: int = 0,
                  reps: int = 100_000, seed: int = 1,
                  step_cap: int = 10 ** 8) -> SimEstimate:
    """Estimate the truncated potential at ``start`` by path simulation.

    Each path accrues c(state) per step and ends when the next step leaves
    the corner (probability ``leak`` from each state).
    """
    _check_args(trunc, start, reps)
    if np.any(trunc.matrix < 0.0):
        raise StructureViolation("transition corner must be nonnegative; "
                                 "a rate corner belongs to simulate_ctmc")
    cdf = np.cumsum(trunc.matrix, axis=1)
    c = cost.values(trunc.n)
    _threads_from_env()
    totals, bad = _dtmc_kernel(cdf, c, start, reps,
                               np.uint64(seed % 2 ** 64), step_cap)
    return _estimate(totals, bad, reps, seed, step_cap)


def simulate_ctmc(trunc: TruncatedChain, cost: CostFunction, start: int = 0,
                  reps: int = 100_000, seed: int = 1,
                  step_cap: int = 10 ** 8) -> SimEstimate:
    """Estimate the time-integral potential of a truncated generator.

    Paths hold an exponential time with the diagonal's rate (cost accrues
    per unit of holding time), then jump with probabilities proportional to
    the off-diagonal rates; the cut rate mass absorbs.
    """
    _check_args(trunc, start, reps)
    out_rate = -np.diagonal(trunc.matrix).copy()
    if np.any(out_rate <= 0.0):
        raise StructureViolation(
            "rate corner needs a strictly negative diagonal everywhere")
    off = trunc.matrix.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off < 0.0):
        raise StructureViolation("off-diagonal rates must be nonnegative")
    jump_cdf = np.cumsum(off, axis=1) / out_rate[:, None]
    c = cost.values(trunc.n)
    _threads_from_env()
    totals, bad = _ctmc_kernel(jump_cdf, out_rate, c, start, reps,
                               np.uint64(seed % 2 ** 64), step_cap)
    return _estimate(totals, bad, reps, seed, step_cap)
