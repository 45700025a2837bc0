"""Synthetic electorates for exercising the pipeline end to end.

Voters are i.i.d.: each draws an integer utility vector from a fixed
per-instance popularity profile (cheaper projects tend to be more popular,
so funded sets have clear favorites plus a contested boundary), then casts
a sincere ballot in the requested format.
"""

from __future__ import annotations

import random
from fractions import Fraction

from pbvote import (
    ApprovalBallot,
    BallotFormat,
    Instance,
    PointsBallot,
    Profile,
    RankingBallot,
)

DEFAULT_K = 5
DEFAULT_T = 8


def popularity(instance: Instance) -> dict[str, int]:
    by_cost = sorted(instance.project_ids, key=lambda p: (instance.cost(p), p))
    weights = {}
    for rank, pid in enumerate(by_cost):
        weights[pid] = max(4, 30 - 3 * rank)
    return weights


def utility_row(rng: random.Random, weights: dict[str, int]) -> dict[str, int]:
    return {pid: rng.randint(0, w) for pid, w in weights.items()}


def to_points(utilities: dict[str, int]) -> dict[str, int]:
    pids = sorted(utilities)
    total = sum(utilities.values())
    if total == 0:
        return {pids[0]: 100}
    base = {p: utilities[p] * 100 // total for p in pids}
    leftover = 100 - sum(base.values())
    by_fraction = sorted(pids, key=lambda p: (-(utilities[p] * 100 % total), p))
    for p in by_fraction[:leftover]:
        base[p] += 1
    return {p: v for p, v in base.items() if v}


def cast_ballot(
    fmt: BallotFormat,
    utilities: dict[str, int],
    instance: Instance,
    k: int = DEFAULT_K,
    t: int = DEFAULT_T,
):
    by_value = sorted(utilities, key=lambda p: (-utilities[p], p))
    if fmt is BallotFormat.POINTS:
        return PointsBallot(points=to_points(utilities))
    if fmt is BallotFormat.KAPPROVAL:
        liked = [p for p in by_value if utilities[p] > 0][:k]
        return ApprovalBallot(approved=frozenset(liked), format=fmt)
    if fmt is BallotFormat.TAPPROVAL:
        return ApprovalBallot(
            approved=frozenset(p for p in utilities if utilities[p] >= t), format=fmt
        )
    if fmt is BallotFormat.KNAPSACK:
        by_density = sorted(
            utilities,
            key=lambda p: (
                -Fraction(utilities[p], instance.cost(p)),
                instance.cost(p),
                p,
            ),
        )
        remaining = instance.budget
        chosen = []
        for pid in by_density:
            if utilities[pid] > 0 and instance.cost(pid) <= remaining:
                chosen.append(pid)
                remaining -= instance.cost(pid)
        return ApprovalBallot(approved=frozenset(chosen), format=fmt)
    if fmt is BallotFormat.RANK_VALUE:
        return RankingBallot(ranking=tuple(by_value), format=fmt)
    by_vfm = sorted(
        utilities, key=lambda p: (-Fraction(utilities[p], instance.cost(p)), p)
    )
    return RankingBallot(ranking=tuple(by_vfm), format=fmt)


def synthetic_profile(
    instance: Instance,
    fmt: BallotFormat,
    n: int,
    seed: int,
    *,
    k: int = DEFAULT_K,
    t: int = DEFAULT_T,
    consistent_fraction: float | None = None,
) -> Profile:
    rng = random.Random(f"synth|{instance.name}|{fmt.value}|{n}|{seed}")
    weights = popularity(instance)
    ballots = []
    consistent = set()
    for i in range(n):
        voter = f"{fmt.value}-{i:03d}"
        ballots.append((voter, cast_ballot(fmt, utility_row(rng, weights), instance, k, t)))
        if consistent_fraction is not None and rng.random() < consistent_fraction:
            consistent.add(voter)
    return Profile(
        instance=instance,
        format=fmt,
        ballots=tuple(ballots),
        k=k if fmt is BallotFormat.KAPPROVAL else None,
        t=t if fmt is BallotFormat.TAPPROVAL else None,
        election=instance.name,
        consistent=frozenset(consistent) if consistent_fraction is not None else None,
    )


def all_format_profiles(instance, n, seed, **kwargs):
    return {
        fmt: synthetic_profile(instance, fmt, n, seed, **kwargs)
        for fmt in BallotFormat
    }
