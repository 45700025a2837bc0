"""Domain types for participatory budgeting elections.

An election is an :class:`Instance` (projects with costs, plus a global
budget) together with a :class:`Profile` of ballots cast in one of six input
formats.  Ballots are converted to integer proxy valuations
(:func:`derive_valuations`), from which per-project scores and the social
welfare of an outcome are exact integer sums.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import ClassVar, Iterable, Mapping, Sequence

import numpy as np

POINTS_TOTAL = 100

CATEGORIES = (
    "Culture and community",
    "Streets, Sidewalks and Transit",
    "Environment, public health and safety",
    "Facilities, parks and recreation",
    "Education",
)

GRID_MAX = 100


class PBError(Exception):
    """Base class for errors raised by this package."""


class InputError(PBError):
    """Malformed or inconsistent input data."""


class ComputationError(PBError):
    """A computation could not be carried out (e.g. table size cap hit)."""


class BallotFormat(str, Enum):
    POINTS = "points"
    KAPPROVAL = "kapproval"
    TAPPROVAL = "tapproval"
    KNAPSACK = "knapsack"
    RANK_VALUE = "rankvalue"
    RANK_VFM = "rankvfm"

    def __str__(self) -> str:  # so f-strings yield the tag, not the repr
        return self.value


BINARY_FORMATS = frozenset(
    {BallotFormat.KAPPROVAL, BallotFormat.TAPPROVAL, BallotFormat.KNAPSACK}
)
RANK_FORMATS = frozenset({BallotFormat.RANK_VALUE, BallotFormat.RANK_VFM})


@dataclass(frozen=True)
class Project:
    """A candidate project: id token, display name, category, integer cost,
    and zero or more (x, y) map coordinates on a 100x100 grid."""

    id: str
    name: str
    category: str
    cost: int
    coordinates: tuple[tuple[int, int], ...] = ()
    description: str = ""

    def __post_init__(self):
        if not self.id:
            raise InputError("project id must be a non-empty token")
        if not isinstance(self.cost, int) or self.cost <= 0:
            raise InputError(f"project {self.id!r}: cost must be a positive integer")
        if self.category not in CATEGORIES:
            raise InputError(f"project {self.id!r}: unknown category {self.category!r}")
        for x, y in self.coordinates:
            if not (0 <= x <= GRID_MAX and 0 <= y <= GRID_MAX):
                raise InputError(
                    f"project {self.id!r}: coordinate ({x}, {y}) outside the "
                    f"{GRID_MAX}x{GRID_MAX} grid"
                )


@dataclass(frozen=True)
class Instance:
    """An ordered set of projects and the budget available to fund them."""

    projects: tuple[Project, ...]
    budget: int
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "projects", tuple(self.projects))
        if not isinstance(self.budget, int) or self.budget <= 0:
            raise InputError("budget must be a positive integer")
        seen = set()
        for p in self.projects:
            if p.id in seen:
                raise InputError(f"duplicate project id {p.id!r}")
            seen.add(p.id)
        if self.projects and all(p.cost > self.budget for p in self.projects):
            warnings.warn(
                f"instance {self.name or '<unnamed>'}: no project fits the budget; "
                "every outcome will be empty",
                stacklevel=2,
            )

    @cached_property
    def _by_id(self) -> dict[str, Project]:
        return {p.id: p for p in self.projects}

    @property
    def project_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.projects)

    def project(self, pid: str) -> Project:
        try:
            return self._by_id[pid]
        except KeyError:
            raise InputError(f"unknown project id {pid!r}") from None

    def cost(self, pid: str) -> int:
        return self.project(pid).cost

    def __contains__(self, pid: str) -> bool:
        return pid in self._by_id

    def total_cost(self, funded: Iterable[str]) -> int:
        return sum(self.cost(p) for p in funded)


@dataclass(frozen=True)
class PointsBallot:
    """Distribute ``POINTS_TOTAL`` points over projects (omitted ids get 0)."""

    points: Mapping[str, int]
    format: ClassVar[BallotFormat] = BallotFormat.POINTS

    def __post_init__(self):
        object.__setattr__(self, "points", dict(self.points))


@dataclass(frozen=True)
class ApprovalBallot:
    """A set of approved projects; used by the k-approval, threshold-approval
    and knapsack formats, which differ only in their validity rule."""

    approved: frozenset[str]
    format: BallotFormat

    def __post_init__(self):
        object.__setattr__(self, "approved", frozenset(self.approved))
        if self.format not in BINARY_FORMATS:
            raise InputError(f"{self.format} is not an approval-style format")


@dataclass(frozen=True)
class RankingBallot:
    """A strict total order over all projects, most preferred first."""

    ranking: tuple[str, ...]
    format: BallotFormat

    def __post_init__(self):
        object.__setattr__(self, "ranking", tuple(self.ranking))
        if self.format not in RANK_FORMATS:
            raise InputError(f"{self.format} is not a ranking format")


Ballot = PointsBallot | ApprovalBallot | RankingBallot


@dataclass(frozen=True)
class BallotViolation:
    """A failed ballot validity check: which rule broke, and on what value."""

    code: str
    message: str
    value: object = None

    def __str__(self) -> str:
        return self.message


def validate_ballot(
    instance: Instance,
    ballot: Ballot,
    *,
    k: int | None = None,
    t: int | None = None,
) -> BallotViolation | None:
    """Check a single ballot against its format's validity rules.

    Returns None when the ballot is valid, otherwise the first violation
    found.  ``k`` is required for k-approval ballots; ``t`` is recorded with
    threshold profiles but plays no role in validity.
    """
    del t  # provenance only
    if isinstance(ballot, PointsBallot):
        referenced = ballot.points.keys()
    elif isinstance(ballot, ApprovalBallot):
        referenced = ballot.approved
    else:
        referenced = ballot.ranking

    for pid in referenced:
        if pid not in instance:
            return BallotViolation(
                "unknown-project", f"unknown project id {pid!r}", pid
            )

    if isinstance(ballot, PointsBallot):
        for pid, pts in ballot.points.items():
            if not isinstance(pts, int) or pts < 0:
                return BallotViolation(
                    "points-negative",
                    f"points for {pid!r} must be a non-negative integer, got {pts!r}",
                    pts,
                )
        total = sum(ballot.points.values())
        if total != POINTS_TOTAL:
            return BallotViolation(
                "points-sum", f"points sum to {total}, expected {POINTS_TOTAL}", total
            )
    elif isinstance(ballot, ApprovalBallot):
        if ballot.format is BallotFormat.KAPPROVAL:
            if k is None:
                return BallotViolation(
                    "missing-k", "k-approval ballots require the format parameter k"
                )
            if len(ballot.approved) > k:
                return BallotViolation(
                    "approval-count",
                    f"approval count {len(ballot.approved)} exceeds k={k}",
                    len(ballot.approved),
                )
        elif ballot.format is BallotFormat.KNAPSACK:
            total = sum(instance.cost(p) for p in ballot.approved)
            if total > instance.budget:
                return BallotViolation(
                    "knapsack-budget",
                    f"cost {total} exceeds budget {instance.budget}",
                    total,
                )
    else:
        if len(ballot.ranking) != len(set(ballot.ranking)) or set(
            ballot.ranking
        ) != set(instance.project_ids):
            return BallotViolation(
                "rank-not-permutation",
                "ranking is not a permutation of all project ids",
                ballot.ranking,
            )
    return None


@dataclass(frozen=True)
class Profile:
    """All ballots of one election cast in a single input format.

    ``consistent`` optionally names the voters who passed a consistency
    check; when present it defines the sampling pool used by the stability
    harness.  ``k``/``t`` are the format parameters of the k-approval and
    threshold-approval formats and must be supplied at construction.
    """

    instance: Instance
    format: BallotFormat
    ballots: tuple[tuple[str, Ballot], ...]
    k: int | None = None
    t: int | None = None
    election: str = ""
    consistent: frozenset[str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "ballots", tuple(tuple(b) for b in self.ballots))
        if self.format is BallotFormat.KAPPROVAL and self.k is None:
            raise InputError("k-approval profiles require the parameter k")
        if self.format is BallotFormat.TAPPROVAL and self.t is None:
            raise InputError("threshold-approval profiles require the parameter t")
        seen = set()
        for voter, ballot in self.ballots:
            if voter in seen:
                raise InputError(f"duplicate voter id {voter!r}")
            seen.add(voter)
            if ballot.format is not self.format:
                raise InputError(
                    f"ballot of voter {voter!r} has format {ballot.format}, "
                    f"profile is {self.format}"
                )

    @property
    def n(self) -> int:
        return len(self.ballots)

    @property
    def voter_ids(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.ballots)

    def sampling_pool(self) -> tuple[str, ...]:
        """Voter ids eligible for subsampling: the consistent voters when
        consistency metadata is present, every voter otherwise."""
        if self.consistent is None:
            return self.voter_ids
        return tuple(v for v in self.voter_ids if v in self.consistent)


class InvalidBallotError(InputError):
    """One or more ballots in a profile failed validation."""

    def __init__(self, issues: Sequence[tuple[str, BallotViolation]]):
        self.issues = list(issues)
        lines = ", ".join(f"{voter}: {viol}" for voter, viol in self.issues)
        super().__init__(f"invalid ballots ({lines})")


def validate_profile(profile: Profile) -> list[tuple[str, BallotViolation]]:
    """Validate every ballot; returns (voter id, violation) pairs."""
    issues = []
    for voter, ballot in profile.ballots:
        viol = validate_ballot(profile.instance, ballot, k=profile.k, t=profile.t)
        if viol is not None:
            issues.append((voter, viol))
    return issues


@dataclass(frozen=True)
class ValuationProfile:
    """Integer proxy utilities: an n-voters by m-projects matrix."""

    voter_ids: tuple[str, ...]
    project_ids: tuple[str, ...]
    matrix: np.ndarray
    source_format: BallotFormat | None = None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.int64)
        if mat.ndim != 2 or mat.shape != (len(self.voter_ids), len(self.project_ids)):
            raise InputError(
                f"valuation matrix shape {mat.shape} does not match "
                f"{len(self.voter_ids)} voters x {len(self.project_ids)} projects"
            )
        if mat.size and mat.min() < 0:
            raise InputError("valuations must be non-negative")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "voter_ids", tuple(self.voter_ids))
        object.__setattr__(self, "project_ids", tuple(self.project_ids))

    @property
    def n(self) -> int:
        return len(self.voter_ids)

    @property
    def m(self) -> int:
        return len(self.project_ids)

    def column(self, pid: str) -> np.ndarray:
        return self.matrix[:, self.project_ids.index(pid)]

    def subset(self, voter_ids: Sequence[str]) -> "ValuationProfile":
        """Row slice for a subset of voters (used by the sampling harness)."""
        index = {v: i for i, v in enumerate(self.voter_ids)}
        rows = [index[v] for v in voter_ids]
        return ValuationProfile(
            voter_ids=tuple(voter_ids),
            project_ids=self.project_ids,
            matrix=self.matrix[rows, :],
            source_format=self.source_format,
        )


def derive_valuations(
    profile: Profile, *, cost_scaled_binary: bool = False
) -> ValuationProfile:
    """Turn ballots into the integer proxy-utility matrix.

    Points ballots are taken verbatim; approval-style ballots become 0/1
    indicators (or 0/cost when ``cost_scaled_binary``, the variant where an
    approval is worth the project's cost); rankings become positional scores
    m - position, so the top-ranked project of m is worth m - 1.
    """
    issues = validate_profile(profile)
    if issues:
        raise InvalidBallotError(issues)

    pids = profile.instance.project_ids
    col = {pid: j for j, pid in enumerate(pids)}
    m = len(pids)
    matrix = np.zeros((profile.n, m), dtype=np.int64)
    for i, (_, ballot) in enumerate(profile.ballots):
        if isinstance(ballot, PointsBallot):
            for pid, pts in ballot.points.items():
                matrix[i, col[pid]] = pts
        elif isinstance(ballot, ApprovalBallot):
            for pid in ballot.approved:
                matrix[i, col[pid]] = (
                    profile.instance.cost(pid) if cost_scaled_binary else 1
                )
        else:
            for position, pid in enumerate(ballot.ranking, start=1):
                matrix[i, col[pid]] = m - position
    return ValuationProfile(
        voter_ids=profile.voter_ids,
        project_ids=pids,
        matrix=matrix,
        source_format=profile.format,
    )


def project_scores(valuations: ValuationProfile) -> dict[str, int]:
    """Total valuation of each project: exact column sums."""
    sums = valuations.matrix.sum(axis=0, dtype=np.int64)
    return {pid: int(sums[j]) for j, pid in enumerate(valuations.project_ids)}


def social_welfare(valuations: ValuationProfile, funded: Iterable[str]) -> int:
    """Sum of all voters' valuations of the funded set, exact."""
    funded = getattr(funded, "funded", funded)  # accept an Outcome directly
    scores = project_scores(valuations)
    return sum(scores[pid] for pid in funded)


@dataclass(frozen=True)
class FundingStep:
    """One funded project in an equal-shares run: the price per unit of
    utility paid (phase 1) or the uniform top-up cap (phase 2)."""

    project: str
    price: Fraction
    phase: int


@dataclass(frozen=True)
class Outcome:
    """A funded set with rule-specific metadata.

    ``payments`` maps funded project -> voter -> exact share of its cost
    (equal-shares only); ``trace`` records the funding order and prices so a
    run can be replayed and audited.
    """

    funded: frozenset[str]
    rule: str
    leftover: Fraction
    payments: Mapping[str, Mapping[str, Fraction]] | None = None
    trace: tuple[FundingStep, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "funded", frozenset(self.funded))
        if self.leftover < 0:
            raise ComputationError("outcome leftover is negative")
