"""Minimax scale-sign invariant confidence intervals for a normal mean from one observation."""

__version__ = "0.1.0"

from .intervals import (
    AT_INFINITY,
    EMPTY,
    IntervalRule,
    LambdaMin,
    MixtureRule,
    coverage,
    coverage_dlambda,
    coverage_limit,
    coverage_mixture,
    expected_length,
    inflection_points,
    min_coverage,
)
from .optimizer import CaseId, CandidateParams, OptimResult, solve, sweep

__all__ = [
    "AT_INFINITY", "EMPTY", "IntervalRule", "LambdaMin", "MixtureRule", "coverage",
    "coverage_dlambda", "coverage_limit", "coverage_mixture", "expected_length",
    "inflection_points", "min_coverage", "CaseId", "CandidateParams", "OptimResult",
    "solve", "sweep",
]
