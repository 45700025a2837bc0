"""Participatory budgeting toolkit: ballot formats with validation, proxy
valuations, greedy and equal-shares aggregation, and a seeded stability and
welfare analysis harness."""

__version__ = "0.1.0"

from .core import (
    BallotFormat,
    BallotViolation,
    ApprovalBallot,
    ComputationError,
    InputError,
    Instance,
    InvalidBallotError,
    Outcome,
    PBError,
    PointsBallot,
    Profile,
    Project,
    RankingBallot,
    ValuationProfile,
    derive_valuations,
    project_scores,
    social_welfare,
    validate_ballot,
    validate_profile,
)
from .aggregation import (
    MesState,
    aggregate,
    aggregate_greedy,
    aggregate_mes,
    mes_completion,
    mes_phase1,
    mes_rho,
    optimal_welfare_outcome,
)
from .analysis import (
    StabilityConfig,
    StabilityReport,
    WelfareMatrix,
    cross_format_welfare,
    entropy,
    frequency_heatmap,
    run_stability,
)
from .io import (
    ELECTIONS,
    ParseError,
    load_election,
    parse_instance,
    parse_profile,
    serialize_instance,
    serialize_profile,
)

__all__ = [
    "ApprovalBallot",
    "BallotFormat",
    "BallotViolation",
    "ComputationError",
    "ELECTIONS",
    "InputError",
    "Instance",
    "InvalidBallotError",
    "MesState",
    "Outcome",
    "PBError",
    "ParseError",
    "PointsBallot",
    "Profile",
    "Project",
    "RankingBallot",
    "StabilityConfig",
    "StabilityReport",
    "ValuationProfile",
    "WelfareMatrix",
    "aggregate",
    "aggregate_greedy",
    "aggregate_mes",
    "cross_format_welfare",
    "derive_valuations",
    "entropy",
    "frequency_heatmap",
    "load_election",
    "mes_completion",
    "mes_phase1",
    "mes_rho",
    "optimal_welfare_outcome",
    "parse_instance",
    "parse_profile",
    "project_scores",
    "run_stability",
    "serialize_instance",
    "serialize_profile",
    "social_welfare",
    "validate_ballot",
    "validate_profile",
]
