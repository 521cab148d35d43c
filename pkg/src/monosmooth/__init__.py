"""Monotone, bounded smoothing splines.

Fits curves minimizing bending energy plus weighted squared data misfit,
constrained to be nondecreasing and bounded above, via exact per-interval
closed forms and branch-and-bound over convex subproblems.  Includes an
independent discretized-QP oracle and a CDF-estimation pipeline.
"""

from .errors import (
    InfeasibleIntervalError,
    MonosmoothError,
    OracleError,
    SplineFormatError,
    ValidationError,
)
from .problem import (
    BoundaryMode,
    DataPoint,
    KnotVector,
    ProblemSpec,
    load_csv,
    make_spec,
    validate,
)
from .interval import CubicSegment, IntervalParams, Regime, build_curve, classify, control, cost
from .objective import (
    FeasibilityReport,
    RegimeAssignment,
    RegimeFlag,
    feasible,
    gradient,
    monotone_certificate,
    total_objective,
    true_objective,
)
from .subproblem import SubproblemResult, fit_step1, solve_node
from .bnb import BnBConfig, BnBNode, SolveReport, SolveStatus, assemble, solve
from .spline import SplineCurve, deserialize, eval_curve, sample_curve, serialize
from .oracle import GridProblem, OracleResult, grid_energy, oracle_solve
from .cdf import HistogramSpec, density, histogram_to_cdf_data, samples_to_cdf_data

__version__ = "0.1.0"

__all__ = [
    "BoundaryMode",
    "BnBConfig",
    "BnBNode",
    "CubicSegment",
    "DataPoint",
    "FeasibilityReport",
    "GridProblem",
    "HistogramSpec",
    "InfeasibleIntervalError",
    "IntervalParams",
    "KnotVector",
    "MonosmoothError",
    "OracleError",
    "OracleResult",
    "ProblemSpec",
    "Regime",
    "RegimeAssignment",
    "RegimeFlag",
    "SolveReport",
    "SolveStatus",
    "SplineCurve",
    "SplineFormatError",
    "SubproblemResult",
    "ValidationError",
    "assemble",
    "build_curve",
    "classify",
    "control",
    "cost",
    "density",
    "deserialize",
    "eval_curve",
    "feasible",
    "fit_step1",
    "gradient",
    "grid_energy",
    "histogram_to_cdf_data",
    "load_csv",
    "make_spec",
    "monotone_certificate",
    "oracle_solve",
    "sample_curve",
    "samples_to_cdf_data",
    "serialize",
    "solve",
    "solve_node",
    "total_objective",
    "true_objective",
    "validate",
]
