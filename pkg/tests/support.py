"""Seeded random chains and dense linear-algebra oracles shared by the tests.

Random kernels come in two flavors.  Dense finite matrices exercise the
coefficient recursions and the truncation folds against plain numpy solves.
Repeating-row kernels extend a sampled banded block to an infinite state
space, which is what the sweep and series machinery actually targets.
"""

import numpy as np

from skipfree.chain import (CostFunction, GeneratorKernel, Structure,
                            TransitionKernel)

QUEUE_SEED = 20260819


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# dense finite matrices


def random_upward_matrix(rng, size: int, depth: int = 4) -> np.ndarray:
    """Stochastic matrix, row i supported on [max(0, i-depth), i+1].

    Every superdiagonal entry is strictly positive, so the structure
    detector tags the result upward skip-free.
    """
    mat = np.zeros((size, size))
    for i in range(size):
        lo = max(0, i - depth)
        hi = min(i + 1, size - 1)
        w = rng.uniform(0.05, 1.0, hi - lo + 1)
        mat[i, lo:hi + 1] = w / w.sum()
    return mat


def random_downward_matrix(rng, size: int, width: int = 4) -> np.ndarray:
    """Stochastic matrix, row i supported on [max(i-1, 0), min(i+width, top)].

    Subdiagonal entries are strictly positive, giving the downward tag.
    """
    mat = np.zeros((size, size))
    for i in range(size):
        lo = max(i - 1, 0)
        hi = min(i + width, size - 1)
        w = rng.uniform(0.05, 1.0, hi - lo + 1)
        mat[i, lo:hi + 1] = w / w.sum()
    return mat


def random_substochastic_matrix(rng, size: int, down: int = 3,
                                up: int = 3) -> np.ndarray:
    """Banded rows scaled to a random sum in [0.3, 0.95]: every state leaks."""
    mat = np.zeros((size, size))
    for i in range(size):
        lo = max(0, i - down)
        hi = min(size - 1, i + up)
        w = rng.uniform(0.05, 1.0, hi - lo + 1)
        mat[i, lo:hi + 1] = w * (rng.uniform(0.3, 0.95) / w.sum())
    return mat


def random_generator_matrix(rng, size: int, down: int = 2, up: int = 2,
                            rate_scale: float = 3.0) -> np.ndarray:
    """Conservative rate matrix with banded positive off-diagonal rates."""
    mat = np.zeros((size, size))
    for i in range(size):
        lo = max(0, i - down)
        hi = min(size - 1, i + up)
        for j in range(lo, hi + 1):
            if j != i:
                mat[i, j] = rng.uniform(0.1, 1.0) * rate_scale
        mat[i, i] = -mat[i].sum()
    return mat


# ---------------------------------------------------------------------------
# infinite repeating-row kernels


def _repair_drift(offs: np.ndarray, w: np.ndarray, min_drift: float) -> np.ndarray:
    """Blend mass from negative offsets toward offset 0 until the mean
    increment is at least min_drift.  Keeps every in-band weight positive."""
    drift = float(offs @ w)
    if drift >= min_drift:
        return w
    neg = offs < 0
    pull = float(-(offs[neg] @ w[neg]))
    # want: drift + (1 - beta) * pull >= min_drift
    beta = max(0.05, 1.0 - (min_drift - drift) / pull)
    out = w.copy()
    freed = (1.0 - beta) * out[neg].sum()
    out[neg] *= beta
    out[offs == 0] += freed
    return out


def _repeating_rows_kernel(rng, offs: np.ndarray, block: int,
                           min_drift: float, structure: Structure,
                           label: str, up_share=None) -> TransitionKernel:
    sampled = []
    for i in range(block):
        keep = offs >= -i
        w = np.zeros(offs.size)
        vals = rng.uniform(0.05, 1.0, int(keep.sum()))
        vals = vals / vals.sum()
        if up_share is not None:
            # pin the top-offset mass first so the drift floor is reachable
            top = rng.uniform(*up_share)
            vals[:-1] *= (1.0 - top) / vals[:-1].sum()
            vals[-1] = top
        w[keep] = vals
        if keep.sum() == offs.size:
            w = _repair_drift(offs, w, min_drift)
        sampled.append(w)
    tail_pattern = sampled[-1]
    up = int(offs[-1])

    def row_builder(i: int, j_max: int) -> np.ndarray:
        w = sampled[i] if i < block else tail_pattern
        out = np.zeros(j_max + 1)
        for k in range(offs.size):
            j = i + int(offs[k])
            if 0 <= j <= j_max:
                out[j] = w[k]
        return out

    return TransitionKernel(
        structure=structure,
        n_states=None,
        row_builder=row_builder,
        support_end=lambda i: i + up,
        tail_oracle=None,
        label=label,
    )


def random_repeating_kernel(rng, block: int = 120, down: int = 3,
                            up: int = 3, label: str = "random banded",
                            structure: Structure = Structure.GENERAL,
                            ) -> TransitionKernel:
    """Infinite stochastic kernel from a sampled banded block.

    Rows 0..block-1 each get their own weights over the offsets
    [-down, up] (clipped at the origin); rows past the block repeat the
    last sampled offset pattern forever.  All in-band weights are strictly
    positive, so every state can reach any truncation boundary.  Drift is
    kept above a mild floor so corner solves stay inside float range.
    """
    return _repeating_rows_kernel(rng, np.arange(-down, up + 1), block,
                                  min_drift=-0.3, structure=structure,
                                  label=label)


def random_upward_repeating_kernel(rng, block: int = 60,
                                   depth: int = 3) -> TransitionKernel:
    """Infinite upward skip-free kernel with a firm upward drift.

    Positive drift keeps the chain transient, so potentials and Green
    entries are finite and the series solvers have a limit to land on.
    """
    return _repeating_rows_kernel(rng, np.arange(-depth, 2), block,
                                  min_drift=0.15,
                                  structure=Structure.UPWARD_SKIP_FREE,
                                  label="random upward drifting",
                                  up_share=(0.45, 0.75))


# ---------------------------------------------------------------------------
# dense oracles (independent of the package's own solvers)


def corner_potential_oracle(corner: np.ndarray, cost_vec: np.ndarray) -> np.ndarray:
    """Reference solve of (I - C) phi = c on a substochastic corner."""
    return np.linalg.solve(np.eye(corner.shape[0]) - corner, cost_vec)


def corner_green_oracle(corner: np.ndarray) -> np.ndarray:
    """Reference (I - C)^(-1) on a substochastic corner."""
    return np.linalg.inv(np.eye(corner.shape[0]) - corner)


def rate_corner_potential_oracle(rate_corner: np.ndarray,
                                 cost_vec: np.ndarray) -> np.ndarray:
    """Reference solve of (-Q_corner) psi = c on a rate corner."""
    return np.linalg.solve(-rate_corner, cost_vec)


def random_cost(rng, kind: str = "geometric") -> CostFunction:
    if kind == "geometric":
        return CostFunction.geometric(ratio=rng.uniform(0.2, 0.8),
                                      scale=rng.uniform(0.5, 3.0))
    if kind == "table":
        vals = rng.uniform(0.0, 2.0, int(rng.integers(3, 9)))
        return CostFunction.from_table(vals.tolist(), default=0.0)
    raise ValueError(kind)


def dense_upward_kernel(rng, size: int, depth: int = 4) -> TransitionKernel:
    return TransitionKernel.from_dense(random_upward_matrix(rng, size, depth),
                                       label="random upward")


def dense_downward_kernel(rng, size: int, width: int = 4) -> TransitionKernel:
    return TransitionKernel.from_dense(random_downward_matrix(rng, size, width),
                                       label="random downward")


def dense_generator(rng, size: int, down: int = 2, up: int = 2) -> GeneratorKernel:
    return GeneratorKernel.from_dense(random_generator_matrix(rng, size, down, up),
                                      label="random generator")
