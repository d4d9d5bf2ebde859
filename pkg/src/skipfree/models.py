"""Parametric chain families and their closed-form benchmarks.

Two classical queueing chains, one per skip-free orientation, each governed
by a single parameter z > 1 (the geometric jump tail decays like 1/z):

* ``gim1_chain``: arrival-embedded queue length of a single-server queue.
  Each step admits one arrival and completes a geometric number of
  services, so the level climbs by at most one:
  P(i, i+1-k) = (z-1)/z^(k+1) for k = 0..i, with the leftover mass
  P(i, 0) = 1/z^(i+1) landing at the origin.  Upward skip-free.

* ``mg1_chain``: departure-embedded queue length of the dual queue.  A
  step removes one customer and admits a geometric batch:
  P(i, i-1+k) = (z-1)/z^(k+1) for k >= 0 (rows 0 and 1 both start at
  column 0).  Downward skip-free, with analytic tail sums supplied so the
  downward solvers can run on the infinite-support rows.

Both families admit closed-form crossing coefficients, potentials for a
matched geometric cost, and (for the downward family) origin-visit counts;
those doubles as oracles in the test-suite and as fast paths for the CLI.
Birth-death generators round out the set for continuous time.

``load_finite_matrix`` reads a dense header-free CSV as either a finite
chain or a finite generator, telling them apart by the sign of the
diagonal.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .chain import (CostFunction, FormatError, GeneratorKernel, RegimeError,
                    Structure, TransitionKernel)

__all__ = [
    "GiM1Params", "MG1Params", "BirthDeathParams",
    "gim1_chain", "mg1_chain", "birth_death_generator",
    "gim1_benchmark_cost", "mg1_benchmark_cost",
    "gim1_closed_potential", "gim1_closed_coefficient",
    "mg1_closed_potential", "mg1_closed_m", "mg1_closed_delta",
    "mg1_closed_coefficient", "closed_potential_for", "load_finite_matrix",
]


@dataclass(frozen=True)
class GiM1Params:
    """Tail parameter z > 1; the chain drifts down iff z > 2."""

    z: float

    def __post_init__(self):
        if not self.z > 1.0:
            raise ValueError(f"gim1 needs z > 1, got z = {self.z}")


@dataclass(frozen=True)
class MG1Params:
    """Tail parameter z > 1; the chain drifts up iff z < 2."""

    z: float

    def __post_init__(self):
        if not self.z > 1.0:
            raise ValueError(f"mg1 needs z > 1, got z = {self.z}")


@dataclass(frozen=True)
class BirthDeathParams:
    """Level-dependent birth/death rates; the last entry repeats forever.

    ``birth[i]`` is the upward rate out of state i; ``death[i-1]`` the
    downward rate out of state i >= 1.
    """

    birth: tuple[float, ...]
    death: tuple[float, ...]

    def __post_init__(self):
        if not self.birth or not self.death:
            raise ValueError("need at least one birth and one death rate")
        if min(self.birth) <= 0.0 or min(self.death) <= 0.0:
            raise ValueError("birth and death rates must be positive")

    @classmethod
    def of(cls, birth: Union[float, Sequence[float]],
           death: Union[float, Sequence[float]]) -> "BirthDeathParams":
        b = (float(birth),) if np.isscalar(birth) else tuple(float(x) for x in birth)
        d = (float(death),) if np.isscalar(death) else tuple(float(x) for x in death)
        return cls(birth=b, death=d)

    def birth_rate(self, i: int) -> float:
        return self.birth[min(i, len(self.birth) - 1)]

    def death_rate(self, i: int) -> float:
        if i < 1:
            raise ValueError("death rate defined for i >= 1")
        return self.death[min(i - 1, len(self.death) - 1)]


# -- upward family --------------------------------------------------------------


def gim1_chain(params: GiM1Params) -> TransitionKernel:
    z = params.z
    a_scale = (z - 1.0) / z

    def row_builder(i: int, j_max: int) -> np.ndarray:
        row = np.zeros(j_max + 1)
        row[0] = z ** (-(i + 1))
        hi = min(i + 1, j_max)
        if hi >= 1:
            js = np.arange(1, hi + 1)
            # P(i, j) = (z-1)/z^(i-j+2) for 1 <= j <= i+1
            row[js] = a_scale * z ** (js - (i + 1.0))
        return row

    return TransitionKernel(
        structure=Structure.UPWARD_SKIP_FREE,
        n_states=None,
        row_builder=row_builder,
        support_end=lambda i: i + 1,
        tail_oracle=None,
        label=f"gim1(z={z:g})",
    )


def gim1_benchmark_cost(params: GiM1Params) -> CostFunction:
    """The matched geometric cost c(i) = z^-i of the closed-form potential."""
    return CostFunction.geometric(1.0 / params.z)


def gim1_closed_potential(params: GiM1Params) -> Callable[[int], float]:
    """phi(i) = z / ((z-2)(z-1)^i) under the matched cost; needs z > 2."""
    z = params.z
    if not z > 2.0:
        raise RegimeError(
            f"gim1 closed-form potential needs the transient regime z > 2, "
            f"got z = {z}")

    def phi(i: int) -> float:
        return z / ((z - 2.0) * (z - 1.0) ** i)

    return phi


def gim1_closed_coefficient(params: GiM1Params, base: int, n: int) -> float:
    """Upward crossing coefficient: 1 at n = base, else 1/(z (z-1)^(n-base))."""
    if n < base:
        return 0.0
    if n == base:
        return 1.0
    z = params.z
    return 1.0 / (z * (z - 1.0) ** (n - base))


# -- downward family -------------------------------------------------------------


def mg1_chain(params: MG1Params) -> TransitionKernel:
    z = params.z
    a_scale = (z - 1.0) / z

    def row_builder(i: int, j_max: int) -> np.ndarray:
        row = np.zeros(j_max + 1)
        start = max(i - 1, 0)
        if start <= j_max:
            js = np.arange(start, j_max + 1)
            # P(i, j) = (z-1)/z^(j-start+1) for j >= start
            row[js] = a_scale * z ** (start - js).astype(float)
        return row

    def tail_oracle(m: int, ks: np.ndarray) -> np.ndarray:
        start = max(m - 1, 0)
        return z ** (start - np.asarray(ks, dtype=float))

    return TransitionKernel(
        structure=Structure.DOWNWARD_SKIP_FREE,
        n_states=None,
        row_builder=row_builder,
        support_end=lambda i: None,
        tail_oracle=tail_oracle,
        label=f"mg1(z={z:g})",
    )


def mg1_benchmark_cost(params: MG1Params) -> CostFunction:
    """Matched cost c(0) = 0, c(i) = ((z-1)/z)^i of the closed-form potential."""
    return CostFunction.geometric((params.z - 1.0) / params.z, origin=0.0)


def _require_mg1_transient(z: float, what: str) -> None:
    if not 1.0 < z < 2.0:
        raise RegimeError(
            f"mg1 {what} needs the transient regime 1 < z < 2, got z = {z}")


def mg1_closed_potential(params: MG1Params) -> Callable[[int], float]:
    """phi(i) = (1/(2-z) - (z^2-z+1)/z^i) (z-1)^(i-1) under the matched cost."""
    z = params.z
    _require_mg1_transient(z, "closed-form potential")

    def phi(i: int) -> float:
        # grouped so every power has base below 1: no overflow at large i,
        # just graceful underflow toward 0
        return ((z - 1.0) ** (i - 1) / (2.0 - z)
                - (z * z - z + 1.0) / z * ((z - 1.0) / z) ** (i - 1))

    return phi


def mg1_closed_m(params: MG1Params) -> Callable[[int], float]:
    """Expected visits to the origin: M(i) = (z-1)^i / (2-z); needs 1 < z < 2."""
    z = params.z
    _require_mg1_transient(z, "origin-visit count")

    def m(i: int) -> float:
        return (z - 1.0) ** i / (2.0 - z)

    return m


def mg1_closed_delta(params: MG1Params) -> float:
    """Origin cost weight of the matched cost: 1/(z-1)."""
    _require_mg1_transient(params.z, "origin cost weight")
    return 1.0 / (params.z - 1.0)


def mg1_closed_coefficient(params: MG1Params, m: int, target: int) -> float:
    """Downward crossing coefficient: 1 at m = target, else 1/(z (z-1)^(target-m))."""
    if m > target:
        return 0.0
    if m == target:
        return 1.0
    z = params.z
    return 1.0 / (z * (z - 1.0) ** (target - m))


# -- birth-death generator -------------------------------------------------------


def birth_death_generator(params: BirthDeathParams) -> GeneratorKernel:
    def row_builder(i: int, j_max: int) -> np.ndarray:
        row = np.zeros(j_max + 1)
        b = params.birth_rate(i)
        d = params.death_rate(i) if i >= 1 else 0.0
        if i >= 1 and i - 1 <= j_max:
            row[i - 1] = d
        if i <= j_max:
            row[i] = -(b + d)
        if i + 1 <= j_max:
            row[i + 1] = b
        return row

    return GeneratorKernel(
        structure=Structure.UPWARD_SKIP_FREE | Structure.DOWNWARD_SKIP_FREE,
        n_states=None,
        row_builder=row_builder,
        support_end=lambda i: i + 1,
        tail_oracle=None,
        label=f"birth_death(birth={list(params.birth)}, death={list(params.death)})",
    )


# -- closed-form fast-path dispatch ---------------------------------------------


def closed_potential_for(family: str, params,
                         cost: CostFunction) -> Optional[Callable[[int], float]]:
    """Closed-form potential when the family, regime, and cost all match.

    Returns ``None`` whenever no closed form applies (wrong cost, or the
    potential is infinite in the given regime), leaving the caller to the
    generic solvers.
    """
    if cost.kind != "geometric":
        return None
    ratio, scale, origin = cost.params
    if family == "gim1":
        z = params.z
        if (z > 2.0 and scale == 1.0 and origin is None
                and math.isclose(ratio, 1.0 / z, rel_tol=1e-14)):
            return gim1_closed_potential(params)
    elif family == "mg1":
        z = params.z
        if (1.0 < z < 2.0 and scale == 1.0 and origin == 0.0
                and math.isclose(ratio, (z - 1.0) / z, rel_tol=1e-14)):
            return mg1_closed_potential(params)
    return None


# -- finite CSV input -------------------------------------------------------------


def load_finite_matrix(path) -> Union[TransitionKernel, GeneratorKernel]:
    """Read a dense header-free CSV as a finite chain or finite generator.

    A negative entry anywhere on the diagonal marks a generator (rows must
    then be conservative up to 1e-9 with nonnegative off-diagonal rates);
    otherwise the matrix is a (sub)stochastic chain (entries in [0, 1], row
    sums at most 1 + 1e-9).  Structure tags come from the zero pattern.
    Raises `FormatError` on anything that fails those checks.
    """
    try:
        mat = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: not a numeric CSV matrix ({exc})") from exc
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise FormatError(f"{path}: matrix must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise FormatError(f"{path}: non-finite entry in matrix")
    label = os.path.basename(str(path))
    diag = np.diagonal(mat)
    if np.any(diag < 0.0):
        off = mat.copy()
        np.fill_diagonal(off, 0.0)
        if np.any(off < 0.0):
            raise FormatError(f"{path}: negative off-diagonal rate in generator")
        if np.any(diag >= 0.0):
            raise FormatError(f"{path}: generator diagonal must be negative everywhere")
        sums = mat.sum(axis=1)
        scale = np.maximum(1.0, -diag)
        if np.any(np.abs(sums) > 1e-9 * scale):
            bad = int(np.argmax(np.abs(sums) / scale))
            raise FormatError(
                f"{path}: generator row {bad} sums to {sums[bad]:.3g}, not 0")
        return GeneratorKernel.from_dense(mat, label=label)
    if np.any(mat < 0.0) or np.any(mat > 1.0 + 1e-12):
        raise FormatError(f"{path}: probabilities must lie in [0, 1]")
    sums = mat.sum(axis=1)
    if np.any(sums > 1.0 + 1e-9):
        bad = int(np.argmax(sums))
        raise FormatError(f"{path}: row {bad} sums to {sums[bad]:.12g} > 1")
    return TransitionKernel.from_dense(mat, label=label)
