"""Potentials and Green matrices of skip-free Markov chains.

A chain is upward skip-free when it climbs at most one level per step and
downward skip-free when it falls at most one.  For such chains the minimal
nonnegative solution of the balance equation (I - P) phi = c (the potential:
the expected total cost accumulated over the chain's lifetime) and the Green
matrix of expected visit counts admit closed-form series built from
one-directional coefficient recursions.  This package evaluates those
series, cross-checks them against northwest-corner truncation solves and
Monte Carlo simulation, classifies chains as transient or recurrent, and
carries everything over to continuous time.

Entry points: build a `TransitionKernel` or `GeneratorKernel` (directly,
via `models`, or from a JSON spec via `specfile`), pick a cost, then call
`potential_upward` / `potential_downward` / `potential_sweep` or their
continuous-time counterparts.  The ``skipfree`` command line wraps all of
it.
"""

from .chain import (CapabilityError, ChainClass, Classification,
                    ConvergentValue, CostFunction, FormatError,
                    GeneratorKernel, GreenResult, PotentialResult,
                    RegimeError, SingularTruncation, Status, Structure,
                    StructureViolation, TransitionKernel, TruncatedChain,
                    TRIDIAGONAL, ValidationIssue, ValidationReport,
                    detect_structure, validate_generator, validate_kernel,
                    worse_status)
from .series import (DEFAULT_POLICY, CompensatedSum, SeriesPolicy,
                     certify_growth, stabilize_sequence,
                     sum_nonnegative_series)
from .truncation import (DEFAULT_LEVELS, SweepResult, TruncatedSolution,
                         green_sweep, northwest_truncate, potential_sweep,
                         relative_gap, solve_substochastic,
                         solve_truncated_potential, truncated_green,
                         write_sweep_csv)
from .upward import (UpwardCoefficientTable, classify_upward,
                     coefficient_triangle, green_upward, potential_upward,
                     upward_coefficient_table, weighted_cost_sum,
                     weighted_cost_sum_by_recursion)
from .downward import (DownwardCoefficientTable, DownwardEngine, RatioLimit,
                       classify_downward, coefficient_extension_residual,
                       downward_coefficient_table, green_downward,
                       origin_cost_weight, potential_downward, tail_cost_sum,
                       tail_cost_sum_by_recursion, visits_to_origin)
from .ctmc import (EmbeddedChain, birth_death_potential, classify_ct,
                   ctmc_green_sweep, ctmc_potential_sweep,
                   ctmc_truncated_potential, embed, green_downward_ct,
                   green_upward_ct, potential_downward_ct,
                   potential_upward_ct, truncate_generator)
from .models import (BirthDeathParams, GiM1Params, MG1Params,
                     birth_death_generator, closed_potential_for,
                     gim1_benchmark_cost, gim1_chain, gim1_closed_coefficient,
                     gim1_closed_potential, load_finite_matrix,
                     mg1_benchmark_cost, mg1_chain, mg1_closed_coefficient,
                     mg1_closed_delta, mg1_closed_m, mg1_closed_potential)
from .simulate import SimEstimate, simulate_ctmc, simulate_dtmc
from .specfile import ModelBundle, build_cost, load_spec

__version__ = "0.1.0"

__all__ = [
    "CapabilityError", "ChainClass", "Classification", "ConvergentValue",
    "CostFunction", "FormatError", "GeneratorKernel", "GreenResult",
    "PotentialResult", "RegimeError", "SingularTruncation", "Status",
    "Structure", "StructureViolation", "TransitionKernel", "TruncatedChain",
    "TRIDIAGONAL", "ValidationIssue", "ValidationReport", "detect_structure",
    "validate_generator", "validate_kernel", "worse_status",
    "DEFAULT_POLICY", "CompensatedSum", "SeriesPolicy", "certify_growth",
    "stabilize_sequence", "sum_nonnegative_series",
    "DEFAULT_LEVELS", "SweepResult", "TruncatedSolution", "green_sweep",
    "northwest_truncate", "potential_sweep", "relative_gap",
    "solve_substochastic", "solve_truncated_potential", "truncated_green",
    "write_sweep_csv",
    "UpwardCoefficientTable", "classify_upward", "coefficient_triangle",
    "green_upward", "potential_upward", "upward_coefficient_table",
    "weighted_cost_sum", "weighted_cost_sum_by_recursion",
    "DownwardCoefficientTable", "DownwardEngine", "RatioLimit",
    "classify_downward", "coefficient_extension_residual",
    "downward_coefficient_table", "green_downward", "origin_cost_weight",
    "potential_downward", "tail_cost_sum", "tail_cost_sum_by_recursion",
    "visits_to_origin",
    "EmbeddedChain", "birth_death_potential", "classify_ct",
    "ctmc_green_sweep", "ctmc_potential_sweep", "ctmc_truncated_potential",
    "embed", "green_downward_ct", "green_upward_ct", "potential_downward_ct",
    "potential_upward_ct", "truncate_generator",
    "BirthDeathParams", "GiM1Params", "MG1Params", "birth_death_generator",
    "closed_potential_for", "gim1_benchmark_cost", "gim1_chain",
    "gim1_closed_coefficient", "gim1_closed_potential", "load_finite_matrix",
    "mg1_benchmark_cost", "mg1_chain", "mg1_closed_coefficient",
    "mg1_closed_delta", "mg1_closed_m", "mg1_closed_potential",
    "SimEstimate", "simulate_ctmc", "simulate_dtmc",
    "ModelBundle", "build_cost", "load_spec",
    "__version__",
]
