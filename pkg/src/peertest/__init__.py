"""Detect strategic manipulation in ranking-based peer assessment."""

__version__ = "0.1.0"

from .aggregate import AggregationRule, FinalOrdering, aggregate, expected_positions_under_uniform  # noqa: E402
from .assign import sample_assignment, sample_assignment_on_topology  # noqa: E402
from .core import (Assignment, ProblemInstance, Ranking, ReviewProfile, Topology, validate_assignment,  # noqa: E402
                   validate_instance, validate_profile)
from .detect import (TestConfig, TestResult, compute_statistic, decide, null_distribution, run_test,  # noqa: E402
                     sample_null_matrices)
from .strategy import NoiseModel, NoiseSchedule, StrategyKind, StrategyMix, apply_strategy, perceive  # noqa: E402

__all__ = [
    "AggregationRule", "Assignment", "FinalOrdering", "NoiseModel", "NoiseSchedule", "ProblemInstance", "Ranking",
    "ReviewProfile", "StrategyKind", "StrategyMix", "TestConfig", "TestResult", "Topology", "aggregate",
    "apply_strategy", "compute_statistic", "decide", "expected_positions_under_uniform", "null_distribution",
    "perceive", "run_test", "sample_assignment", "sample_assignment_on_topology", "sample_null_matrices",
    "validate_assignment", "validate_instance", "validate_profile",
]
