"""Kernels, costs, and shared result types for skip-free Markov chain solvers.

A chain lives on the state space {0, 1, 2, ...} (finite or countably
infinite).  A transition kernel is *upward skip-free* when every row i puts
positive mass on i+1 and no mass on states above i+1, and *downward
skip-free* when every row i >= 1 puts positive mass on i-1 and none below
i-1.  Rows may otherwise be arbitrary, including rows with infinite support.

Solvers in this package assume irreducible kernels (and, for generators,
non-explosive dynamics).  These are contracts on the caller's input; they are
documented rather than verified, since neither is decidable from finitely
many row queries.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

ROW_SUM_TOL = 1e-12


class StructureViolation(ValueError):
    """A kernel's rows contradict its declared skip-free structure."""


class CapabilityError(RuntimeError):
    """An operation needs a capability the kernel lacks (e.g. a tail oracle)."""


class SingularTruncation(ArithmeticError):
    """A truncated system has no leak on some closed set of states."""


class RegimeError(ValueError):
    """A closed form was requested outside its parameter regime."""


class FormatError(ValueError):
    """A chain spec file or matrix file is malformed."""


class Structure(enum.Flag):
    """Skip-free structure tags.  Tridiagonal kernels carry both flags."""

    GENERAL = 0
    UPWARD_SKIP_FREE = enum.auto()
    DOWNWARD_SKIP_FREE = enum.auto()


TRIDIAGONAL = Structure.UPWARD_SKIP_FREE | Structure.DOWNWARD_SKIP_FREE


class Status(enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    INDEX_CAP_REACHED = "index_cap_reached"
    OSCILLATING = "oscillating"


_STATUS_SEVERITY = {
    Status.CONVERGED: 0,
    Status.OSCILLATING: 1,
    Status.INDEX_CAP_REACHED: 2,
    Status.DIVERGED: 3,
}


def worse_status(a: Status, b: Status) -> Status:
    """The more severe of two evaluation statuses."""
    return a if _STATUS_SEVERITY[a] >= _STATUS_SEVERITY[b] else b


@dataclass(frozen=True)
class ConvergentValue:
    """A numerically stabilized limit.

    Attributes
    ----------
    value : float
        The stabilized value; ``math.inf`` marks a certified divergence.
    status : Status
        How the evaluation terminated.
    terms_used : int
        Number of terms (or levels) consumed.
    last_increment : float
        Magnitude of the final increment examined.
    """

    value: float
    status: Status
    terms_used: int
    last_increment: float

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


@dataclass(frozen=True)
class PotentialResult:
    """Potential values at selected states.

    ``values[k]`` is the minimal nonnegative solution evaluated at
    ``states[k]``; entries are ``inf`` when the defining series diverges
    (recurrent chain with nonzero cost).
    """

    states: tuple[int, ...]
    values: np.ndarray
    status: Status
    terms_used: int
    last_increment: float

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


@dataclass(frozen=True)
class GreenResult:
    """Green-matrix entries for selected rows and columns."""

    rows: tuple[int, ...]
    cols: tuple[int, ...]
    matrix: np.ndarray
    status: Status
    terms_used: int

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


class ChainClass(enum.Enum):
    TRANSIENT = "Transient"
    RECURRENT = "Recurrent"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Classification:
    """Transience/recurrence verdict with the numeric criterion behind it."""

    verdict: ChainClass
    criterion: ConvergentValue
    detail: str


@dataclass(frozen=True)
class ValidationIssue:
    row: Optional[int]
    message: str


@dataclass(frozen=True)
class ValidationReport:
    rows_checked: int
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues


@dataclass(frozen=True)
class CostFunction:
    """Nonnegative per-state running cost c(i).

    Values are validated at query time: a negative or non-finite cost raises
    ``ValueError``.  ``kind``/``params`` describe closed-form families so
    model fast paths can recognize them.
    """

    _fn: Callable[[int], float]
    kind: str = "custom"
    params: tuple = ()

    def __call__(self, i: int) -> float:
        v = float(self._fn(i))
        if not (v >= 0.0) or math.isinf(v):
            raise ValueError(f"cost must be finite and >= 0, got c({i}) = {v}")
        return v

    def values(self, i_max: int) -> np.ndarray:
        """Dense cost vector for states 0..i_max."""
        return np.array([self(i) for i in range(i_max + 1)], dtype=float)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @classmethod
    def geometric(cls, ratio: float, scale: float = 1.0,
                  origin: float | None = None) -> "CostFunction":
        """c(i) = scale * ratio**i, with an optional override at i = 0."""
        if not (0.0 <= ratio) or not (scale >= 0.0):
            raise ValueError("geometric cost needs ratio >= 0 and scale >= 0")

        def fn(i: int) -> float:
            if i == 0 and origin is not None:
                return origin
            return scale * ratio ** i

        return cls(fn, kind="geometric", params=(ratio, scale, origin))

    @classmethod
    def indicator(cls, state: int) -> "CostFunction":
        return cls(lambda i: 1.0 if i == state else 0.0,
                   kind="indicator", params=(state,))

    @classmethod
    def from_table(cls, values: Sequence[float], default: float = 0.0) -> "CostFunction":
        vals = tuple(float(v) for v in values)
        return cls(lambda i: vals[i] if i < len(vals) else default,
                   kind="table", params=(vals, default))

    @classmethod
    def zero(cls) -> "CostFunction":
        return cls(lambda i: 0.0, kind="zero", params=())


def _as_dense(row: np.ndarray, j_max: int) -> np.ndarray:
    out = np.zeros(j_max + 1)
    m = min(len(row), j_max + 1)
    out[:m] = row[:m]
    return out


@dataclass(frozen=True)
class TransitionKernel:
    """Row-wise view of a (sub)stochastic transition matrix.

    Parameters
    ----------
    structure : Structure
        Declared skip-free tags.  Validation is lazy; see `validate_kernel`.
    n_states : int or None
        ``None`` means countably infinite.
    row_builder : callable(i, j_max) -> ndarray
        Dense probabilities for columns 0..j_max of row i.
    support_end : callable(i) -> int or None
        Largest column with mass in row i; ``None`` for infinite support.
    tail_oracle : callable(m, ks) -> ndarray, optional
        Vectorized analytic tail sums sum_{j >= k} P(m, j) for an int array
        of thresholds ``ks`` (each > m).  Required by downward-recursion
        solvers when rows have infinite support.
    """

    structure: Structure
    n_states: Optional[int]
    row_builder: Callable[[int, int], np.ndarray]
    support_end: Callable[[int], Optional[int]]
    tail_oracle: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    label: str = "chain"

    # -- row access ------------------------------------------------------

    def _check_state(self, i: int) -> None:
        if i < 0 or (self.n_states is not None and i >= self.n_states):
            raise ValueError(f"state {i} outside the state space")

    def dense_row(self, i: int, j_max: int) -> np.ndarray:
        self._check_state(i)
        if j_max < 0:
            return np.zeros(0)
        return _as_dense(np.asarray(self.row_builder(i, j_max), dtype=float), j_max)

    def row(self, i: int, chunk: int = 64) -> Iterator[tuple[int, float]]:
        """Lazily enumerate (column, probability) pairs of row i, ascending."""
        self._check_state(i)
        end = self.support_end(i)
        lo = 0
        while True:
            hi = lo + chunk - 1 if end is None else min(end, lo + chunk - 1)
            if hi < lo:
                return
            vals = self.dense_row(i, hi)[lo:]
            for off in np.nonzero(vals)[0]:
                yield lo + int(off), float(vals[off])
            if end is not None and hi >= end:
                return
            lo = hi + 1

    def prob(self, i: int, j: int) -> float:
        return float(self.dense_row(i, j)[j])

    # -- aggregate queries -------------------------------------------------

    def prefix_sum(self, n: int, k: int) -> float:
        """sum_{j = 0..k} P(n, j); requires 0 <= k < n."""
        if not 0 <= k < n:
            raise ValueError(f"prefix sum needs 0 <= k < n, got k={k}, n={n}")
        return float(self.dense_row(n, k).sum())

    def tail_sum(self, m: int, k: int) -> float:
        """sum_{j >= k} P(m, j); requires k > m >= 0."""
        if not 0 <= m < k:
            raise ValueError(f"tail sum needs k > m >= 0, got m={m}, k={k}")
        if self.tail_oracle is not None:
            return float(self.tail_oracle(m, np.array([k]))[0])
        end = self.support_end(m)
        if end is not None:
            if k > end:
                return 0.0
            return float(self.dense_row(m, end)[k:].sum())
        # rows sum to one, so the complement is exact up to rounding
        return max(0.0, 1.0 - float(self.dense_row(m, k - 1).sum()))

    def tail_weights(self, m: int, k_hi: int) -> np.ndarray:
        """Vector of tail sums for thresholds k = m+1 .. k_hi."""
        ks = np.arange(m + 1, k_hi + 1)
        if len(ks) == 0:
            return np.zeros(0)
        if self.tail_oracle is not None:
            return np.asarray(self.tail_oracle(m, ks), dtype=float)
        end = self.support_end(m)
        if end is not None:
            row = self.dense_row(m, max(end, k_hi))
            rev = np.cumsum(row[::-1])[::-1]
            out = np.zeros(len(ks))
            valid = ks <= end
            out[valid] = rev[ks[valid]]
            return out
        raise CapabilityError(
            f"{self.label}: tail weights over an index range need either "
            "finite row support or an analytic tail oracle")

    @property
    def has_tail_capability(self) -> bool:
        return self.tail_oracle is not None or self.support_end(0) is not None

    # -- skip-free accessors ------------------------------------------------

    def up_weight(self, i: int) -> float:
        """P(i, i+1); positive on upward skip-free rows."""
        w = self.prob(i, i + 1)
        if w <= 0.0:
            raise StructureViolation(f"row {i}: no upward step (P(i,i+1) = {w})")
        return w

    def down_weight(self, i: int) -> float:
        """P(i, i-1); positive on downward skip-free rows for i >= 1."""
        if i < 1:
            raise ValueError("down weight defined for i >= 1")
        w = self.prob(i, i - 1)
        if w <= 0.0:
            raise StructureViolation(f"row {i}: no downward step (P(i,i-1) = {w})")
        return w

    def prefix_weights(self, m: int) -> np.ndarray:
        """Cumulative row mass P_m^{(k-)} = sum_{j<=k} P(m,j) for k = 0..m-1."""
        if m == 0:
            return np.zeros(0)
        return np.cumsum(self.dense_row(m, m - 1))

    # -- constructors --------------------------------------------------------

    @classmethod
    def from_dense(cls, matrix: np.ndarray,
                   structure: Structure | None = None,
                   label: str = "finite chain") -> "TransitionKernel":
        """Wrap a dense square (sub)stochastic matrix.

        When ``structure`` is omitted the zero pattern is inspected: a single
        nonzero superdiagonal with positive first-superdiagonal entries tags
        the kernel upward skip-free, mirrored for downward; tridiagonal
        matrices carry both tags.
        """
        mat = np.array(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise FormatError(f"matrix must be square, got shape {mat.shape}")
        n = mat.shape[0]
        if structure is None:
            structure = detect_structure(mat)
        return cls(
            structure=structure,
            n_states=n,
            row_builder=lambda i, j_max: mat[i, : j_max + 1],
            support_end=lambda i: n - 1,
            tail_oracle=None,
            label=label,
        )


@dataclass(frozen=True)
class GeneratorKernel:
    """Row-wise view of a conservative CTMC generator Q.

    Off-diagonal entries are nonnegative rates, diagonals are strictly
    negative, and rows sum to zero.  Tail/prefix queries exclude nothing:
    they are plain partial sums of the requested row range (the diagonal
    only ever falls outside the queried ranges used by the solvers).
    """

    structure: Structure
    n_states: Optional[int]
    row_builder: Callable[[int, int], np.ndarray]
    support_end: Callable[[int], Optional[int]]
    tail_oracle: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    label: str = "generator"

    def _check_state(self, i: int) -> None:
        if i < 0 or (self.n_states is not None and i >= self.n_states):
            raise ValueError(f"state {i} outside the state space")

    def dense_row(self, i: int, j_max: int) -> np.ndarray:
        self._check_state(i)
        if j_max < 0:
            return np.zeros(0)
        return _as_dense(np.asarray(self.row_builder(i, j_max), dtype=float), j_max)

    def rate(self, i: int, j: int) -> float:
        return float(self.dense_row(i, j)[j])

    def out_rate(self, i: int) -> float:
        """|Q(i, i)|, the total transition rate out of state i."""
        d = self.rate(i, i)
        if d >= 0.0:
            raise StructureViolation(f"row {i}: diagonal must be negative, got {d}")
        return -d

    def prefix_weights(self, m: int) -> np.ndarray:
        """Q_m^{(k-)} = sum_{j<=k} Q(m,j) for k = 0..m-1 (diagonal excluded by range)."""
        if m == 0:
            return np.zeros(0)
        return np.cumsum(self.dense_row(m, m - 1))

    def up_weight(self, i: int) -> float:
        w = self.rate(i, i + 1)
        if w <= 0.0:
            raise StructureViolation(f"row {i}: no upward rate (Q(i,i+1) = {w})")
        return w

    def down_weight(self, i: int) -> float:
        if i < 1:
            raise ValueError("down weight defined for i >= 1")
        w = self.rate(i, i - 1)
        if w <= 0.0:
            raise StructureViolation(f"row {i}: no downward rate (Q(i,i-1) = {w})")
        return w

    def tail_sum(self, m: int, k: int) -> float:
        """sum_{j >= k} Q(m, j) for k > m (all entries in range are rates)."""
        if not 0 <= m < k:
            raise ValueError(f"tail sum needs k > m >= 0, got m={m}, k={k}")
        if self.tail_oracle is not None:
            return float(self.tail_oracle(m, np.array([k]))[0])
        end = self.support_end(m)
        if end is not None:
            if k > end:
                return 0.0
            return float(self.dense_row(m, end)[k:].sum())
        # conservative rows: mass at or beyond k is minus the mass before k
        return max(0.0, -float(self.dense_row(m, k - 1).sum()))

    def tail_weights(self, m: int, k_hi: int) -> np.ndarray:
        ks = np.arange(m + 1, k_hi + 1)
        if len(ks) == 0:
            return np.zeros(0)
        if self.tail_oracle is not None:
            return np.asarray(self.tail_oracle(m, ks), dtype=float)
        end = self.support_end(m)
        if end is not None:
            row = self.dense_row(m, max(end, k_hi))
            rev = np.cumsum(row[::-1])[::-1]
            out = np.zeros(len(ks))
            valid = ks <= end
            out[valid] = rev[ks[valid]]
            return out
        raise CapabilityError(
            f"{self.label}: tail weights over an index range need either "
            "finite row support or an analytic tail oracle")

    @property
    def has_tail_capability(self) -> bool:
        return self.tail_oracle is not None or self.support_end(0) is not None

    @classmethod
    def from_dense(cls, matrix: np.ndarray,
                   structure: Structure | None = None,
                   label: str = "finite generator") -> "GeneratorKernel":
        mat = np.array(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise FormatError(f"matrix must be square, got shape {mat.shape}")
        n = mat.shape[0]
        if structure is None:
            structure = detect_structure(mat)
        return cls(
            structure=structure,
            n_states=n,
            row_builder=lambda i, j_max: mat[i, : j_max + 1],
            support_end=lambda i: n - 1,
            tail_oracle=None,
            label=label,
        )


@dataclass(frozen=True)
class TruncatedChain:
    """Northwest (n+1) x (n+1) corner of a kernel.

    ``matrix`` keeps the parent's entries (diagonal included).  ``leak`` is
    the per-row mass (or rate) that the truncation cut off; carrying it
    explicitly lets the solver run without a single subtraction, which is
    what preserves componentwise accuracy for potentials spanning many
    orders of magnitude.
    """

    n: int
    matrix: np.ndarray
    leak: np.ndarray
    source_structure: Structure


def detect_structure(matrix: np.ndarray) -> Structure:
    """Tag a dense matrix by its zero pattern.

    Boundary rows are exempt from the positivity requirement (the last row
    of a finite state space has no upward neighbor).
    """
    n = matrix.shape[0]
    off = matrix.copy()
    np.fill_diagonal(off, 0.0)
    structure = Structure.GENERAL
    if n >= 2:
        upper_ok = not np.any(np.triu(off, 2) != 0.0)
        if upper_ok and np.all(np.diagonal(matrix, 1) > 0.0):
            structure |= Structure.UPWARD_SKIP_FREE
        lower_ok = not np.any(np.tril(off, -2) != 0.0)
        if lower_ok and np.all(np.diagonal(matrix, -1) > 0.0):
            structure |= Structure.DOWNWARD_SKIP_FREE
    return structure


def _row_issues_kernel(kernel: TransitionKernel, i: int) -> list[ValidationIssue]:
    issues: list[ValidationIssue] = []
    end = kernel.support_end(i)
    probe_hi = (i + 34) if end is None else end
    row = kernel.dense_row(i, probe_hi)
    if np.any(row < -ROW_SUM_TOL) or np.any(row > 1.0 + ROW_SUM_TOL):
        issues.append(ValidationIssue(i, f"probability out of [0,1] at row {i}"))
    if not np.all(np.isfinite(row)):
        issues.append(ValidationIssue(i, f"non-finite probability at row {i}"))
        return issues
    # row sum
    if end is not None:
        total = float(kernel.dense_row(i, end).sum())
        if abs(total - 1.0) > 1e-9:
            issues.append(ValidationIssue(i, f"row sum {total:.12g} != 1 at row {i}"))
    elif kernel.tail_oracle is not None:
        k = i + 8
        total = float(kernel.dense_row(i, k - 1).sum()) + kernel.tail_sum(i, k)
        if abs(total - 1.0) > 1e-9:
            issues.append(ValidationIssue(
                i, f"prefix + tail = {total:.12g} != 1 at row {i}"))
    else:
        issues.append(ValidationIssue(
            i, f"row sum unverifiable at row {i} (infinite support, no tail oracle)"))
    # structure tags
    last = kernel.n_states - 1 if kernel.n_states is not None else None
    if Structure.UPWARD_SKIP_FREE in kernel.structure:
        if end is None:
            issues.append(ValidationIssue(i, f"infinite support on upward row {i}"))
        else:
            if np.any(row[i + 2:] != 0.0):
                issues.append(ValidationIssue(i, f"skip above at row {i}"))
            if i != last and (i + 1 >= len(row) or row[i + 1] <= 0.0):
                issues.append(ValidationIssue(i, f"no upward step at row {i}"))
    if Structure.DOWNWARD_SKIP_FREE in kernel.structure:
        if i >= 2 and np.any(row[: i - 1] != 0.0):
            issues.append(ValidationIssue(i, f"skip below at row {i}"))
        if i >= 1 and row[i - 1] <= 0.0:
            issues.append(ValidationIssue(i, f"no downward step at row {i}"))
    # tail oracle consistency on a few thresholds
    if kernel.tail_oracle is not None:
        for k in (i + 1, i + 3):
            gap = kernel.tail_sum(i, k) - kernel.tail_sum(i, k + 1)
            p = row[k] if k < len(row) else kernel.prob(i, k)
            if abs(gap - p) > 1e-10:
                issues.append(ValidationIssue(
                    i, f"tail oracle inconsistent with row entry at (row {i}, col {k})"))
                break
    return issues


def validate_kernel(kernel: TransitionKernel, i_max: int) -> ValidationReport:
    """Check rows 0..i_max for probability bounds, row sums, declared
    structure, and tail-oracle consistency.  Returns every issue found."""
    issues: list[ValidationIssue] = []
    hi = i_max if kernel.n_states is None else min(i_max, kernel.n_states - 1)
    for i in range(hi + 1):
        issues.extend(_row_issues_kernel(kernel, i))
    return ValidationReport(rows_checked=hi + 1, issues=tuple(issues))


def validate_generator(gen: GeneratorKernel, i_max: int) -> ValidationReport:
    """Check rows 0..i_max of a generator: negative diagonal, nonnegative
    off-diagonal rates, conservative rows, declared structure."""
    issues: list[ValidationIssue] = []
    hi = i_max if gen.n_states is None else min(i_max, gen.n_states - 1)
    for i in range(hi + 1):
        end = gen.support_end(i)
        probe_hi = (i + 34) if end is None else end
        row = gen.dense_row(i, probe_hi)
        if not np.all(np.isfinite(row)):
            issues.append(ValidationIssue(i, f"non-finite rate at row {i}"))
            continue
        if i < len(row) and row[i] >= 0.0:
            issues.append(ValidationIssue(i, f"diagonal not negative at row {i}"))
        off = row.copy()
        if i < len(off):
            off[i] = 0.0
        if np.any(off < 0.0):
            issues.append(ValidationIssue(i, f"negative off-diagonal rate at row {i}"))
        scale = max(1.0, abs(row[i]) if i < len(row) else 1.0)
        if end is not None:
            total = float(gen.dense_row(i, end).sum())
            if abs(total) > 1e-9 * scale:
                issues.append(ValidationIssue(
                    i, f"row sum {total:.3g} != 0 at row {i} (not conservative)"))
        last = gen.n_states - 1 if gen.n_states is not None else None
        if Structure.UPWARD_SKIP_FREE in gen.structure and end is not None:
            if np.any(row[i + 2:] != 0.0):
                issues.append(ValidationIssue(i, f"skip above at row {i}"))
            if i != last and (i + 1 >= len(row) or row[i + 1] <= 0.0):
                issues.append(ValidationIssue(i, f"no upward rate at row {i}"))
        if Structure.DOWNWARD_SKIP_FREE in gen.structure:
            if i >= 2 and np.any(row[: i - 1] != 0.0):
                issues.append(ValidationIssue(i, f"skip below at row {i}"))
            if i >= 1 and row[i - 1] <= 0.0:
                issues.append(ValidationIssue(i, f"no downward rate at row {i}"))
    return ValidationReport(rows_checked=hi + 1, issues=tuple(issues))
