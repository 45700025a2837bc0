"""Stability and welfare experiments over a profile.

The stability harness repeatedly samples a fixed number of voters without
replacement, aggregates the sampled sub-profile under each requested rule
(the same sample feeds every rule), and tallies how often each project is
funded.  Sampling streams are derived from the master seed and the
configuration labels, so repetitions are reproducible and order independent.

The welfare harness evaluates outcomes computed from one format's profile
against the valuations deduced from a designated reference format, giving a
common yardstick across formats.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .aggregation import RULES, optimal_welfare_outcome
from .core import (
    BallotFormat,
    InputError,
    Instance,
    Profile,
    derive_valuations,
    project_scores,
)

DEFAULT_REPETITIONS = 200
DEFAULT_SAMPLE_SIZES = (10, 20, 30, 40)


def entropy(frequencies: Iterable[float | Fraction]) -> float:
    """Mean per-project binary entropy of funding frequencies, in [0, 1].

    Uses log base 2 with the convention 0*log(0) = 0; an empty collection
    has entropy 0.
    """
    total = 0.0
    count = 0
    for f in frequencies:
        f = float(f)
        if not 0.0 <= f <= 1.0:
            raise InputError(f"frequency {f} outside [0, 1]")
        h = 0.0
        if 0.0 < f < 1.0:
            h = -(f * math.log2(f) + (1.0 - f) * math.log2(1.0 - f))
        total += h
        count += 1
    return total / count if count else 0.0


def _sample_stream(
    master_seed: int, election: str, fmt: str, nprime: int, rep: int
) -> random.Random:
    """Deterministic per-repetition RNG from the master seed and labels.

    Hashing the labels keeps the derivation independent of Python's
    randomized string hashing and of execution order.
    """
    material = f"{master_seed}|{election}|{fmt}|{nprime}|{rep}".encode()
    return random.Random(int.from_bytes(hashlib.sha256(material).digest(), "big"))


@dataclass(frozen=True)
class StabilityConfig:
    election: str
    format: BallotFormat
    rule: str
    nprime: int
    repetitions: int
    master_seed: int
    pool: str  # "consistent" or "all"


@dataclass(frozen=True)
class StabilityReport:
    """Funding counts over seeded repetitions for one configuration."""

    config: StabilityConfig
    counts: Mapping[str, int]
    entropy: float
    sample_digests: tuple[str, ...]
    funded_sets: tuple[frozenset[str], ...] | None = None

    @property
    def frequencies(self) -> dict[str, Fraction]:
        r = self.config.repetitions
        return {pid: Fraction(c, r) for pid, c in self.counts.items()}


def run_stability(
    profile: Profile,
    rules: Sequence[str],
    nprime: int,
    repetitions: int,
    master_seed: int,
    *,
    keep_funded_sets: bool = False,
) -> dict[str, StabilityReport]:
    """Sample ``nprime`` voters ``repetitions`` times and aggregate each
    sample under every rule, returning one report per rule.

    Sampling is uniform without replacement from the profile's pool (the
    consistency-passing voters when that metadata exists).  Within a
    repetition all rules see the identical sample, recorded as a digest of
    the sampled voter ids.
    """
    if repetitions < 1:
        raise InputError("repetitions must be at least 1")
    for rule in rules:
        if rule not in RULES:
            raise InputError(f"unknown aggregation rule {rule!r}")
    pool = profile.sampling_pool()
    if nprime > len(pool):
        raise InputError(
            f"sample size {nprime} exceeds the {len(pool)} available ballots"
        )
    valuations = derive_valuations(profile)
    instance = profile.instance
    election = profile.election or instance.name
    counts = {rule: {pid: 0 for pid in instance.project_ids} for rule in rules}
    funded_sets: dict[str, list[frozenset[str]]] = {rule: [] for rule in rules}
    digests = []
    for rep in range(repetitions):
        rng = _sample_stream(master_seed, election, profile.format.value, nprime, rep)
        sampled = rng.sample(pool, nprime)
        digest = hashlib.sha256(",".join(sorted(sampled)).encode()).hexdigest()[:16]
        digests.append(digest)
        sub = valuations.subset(sampled)
        for rule in rules:
            outcome = RULES[rule](instance, sub)
            for pid in outcome.funded:
                counts[rule][pid] += 1
            if keep_funded_sets:
                funded_sets[rule].append(outcome.funded)
    reports = {}
    for rule in rules:
        freqs = [Fraction(c, repetitions) for c in counts[rule].values()]
        reports[rule] = StabilityReport(
            config=StabilityConfig(
                election=election,
                format=profile.format,
                rule=rule,
                nprime=nprime,
                repetitions=repetitions,
                master_seed=master_seed,
                pool="all" if profile.consistent is None else "consistent",
            ),
            counts=dict(counts[rule]),
            entropy=entropy(freqs),
            sample_digests=tuple(digests),
            funded_sets=tuple(funded_sets[rule]) if keep_funded_sets else None,
        )
    return reports


def heatmap_column_order(instance: Instance) -> list[str]:
    """Projects ordered by increasing cost, ties by id."""
    return sorted(instance.project_ids, key=lambda p: (instance.cost(p), p))


def frequency_heatmap(
    reports: Sequence[StabilityReport], instance: Instance
) -> list[list[object]]:
    """Tabulate funding frequencies, one row per report, columns ordered by
    increasing project cost.  All reports must belong to one election."""
    elections = {r.config.election for r in reports}
    if len(elections) > 1:
        raise InputError(f"reports span multiple elections: {sorted(elections)}")
    columns = heatmap_column_order(instance)
    rows: list[list[object]] = [["format"] + columns]
    for report in reports:
        freqs = report.frequencies
        rows.append(
            [report.config.format.value] + [float(freqs[pid]) for pid in columns]
        )
    return rows


def entropy_table(reports: Sequence[StabilityReport]) -> list[list[object]]:
    """Rows (format, rule, sample size, entropy) for entropy-vs-n' curves."""
    rows: list[list[object]] = [["format", "rule", "nprime", "entropy"]]
    for report in sorted(
        reports,
        key=lambda r: (r.config.format.value, r.config.rule, r.config.nprime),
    ):
        c = report.config
        rows.append([c.format.value, c.rule, c.nprime, report.entropy])
    return rows


def entropy_comparison(reports: Sequence[StabilityReport]) -> dict:
    """Greedy-vs-equal-shares entropy per (format, sample size) plus the
    overall verdict; informational, nothing is asserted."""
    by_key: dict[tuple[str, int], dict[str, float]] = {}
    for report in reports:
        key = (report.config.format.value, report.config.nprime)
        by_key.setdefault(key, {})[report.config.rule] = report.entropy
    pairs = []
    for (fmt, nprime), entries in sorted(by_key.items()):
        if "greedy" in entries and "mes" in entries:
            pairs.append(
                {
                    "format": fmt,
                    "nprime": nprime,
                    "greedy_entropy": entries["greedy"],
                    "mes_entropy": entries["mes"],
                    "mes_lower_or_equal": entries["mes"] <= entries["greedy"],
                }
            )
    return {
        "pairs": pairs,
        "mes_entropy_consistently_lower_or_equal": bool(pairs)
        and all(p["mes_lower_or_equal"] for p in pairs),
    }


@dataclass(frozen=True)
class WelfareMatrix:
    """Per-voter welfare of each (format, rule) outcome, measured under the
    reference format's valuations."""

    reference: BallotFormat
    reference_voters: int
    entries: Mapping[tuple[BallotFormat, str], float]
    normalized: Mapping[tuple[BallotFormat, str], float] | None = None


def cross_format_welfare(
    profiles: Mapping[BallotFormat, Profile],
    rules: Sequence[str],
    reference_format: BallotFormat,
    *,
    normalize: bool = False,
) -> WelfareMatrix:
    """Evaluate each format's outcomes against the reference valuations.

    For every (format, rule) pair the rule runs on that format's full
    profile; the funded set is then scored with the valuations deduced from
    the reference profile and averaged per reference voter.  Normalized
    entries divide by the per-voter welfare of the exact optimum under the
    reference valuations.
    """
    if reference_format not in profiles:
        raise InputError(f"no profile provided for reference format {reference_format}")
    reference = profiles[reference_format]
    ref_vals = derive_valuations(reference)
    ref_scores = project_scores(ref_vals)
    n_ref = ref_vals.n
    if n_ref == 0:
        raise InputError("reference profile has no ballots")
    instance = reference.instance
    for fmt, profile in profiles.items():
        if (
            profile.instance.project_ids != instance.project_ids
            or profile.instance.budget != instance.budget
        ):
            raise InputError(
                f"profile for format {fmt} belongs to a different election"
            )

    entries: dict[tuple[BallotFormat, str], float] = {}
    exact: dict[tuple[BallotFormat, str], Fraction] = {}
    for fmt, profile in profiles.items():
        vals = derive_valuations(profile)
        for rule in rules:
            outcome = RULES[rule](instance, vals)
            welfare = sum(ref_scores[pid] for pid in outcome.funded)
            exact[(fmt, rule)] = Fraction(welfare, n_ref)
            entries[(fmt, rule)] = welfare / n_ref

    normalized = None
    if normalize:
        optimum = optimal_welfare_outcome(instance, ref_vals)
        best = Fraction(sum(ref_scores[pid] for pid in optimum.funded), n_ref)
        if best == 0:
            raise InputError("reference optimum welfare is zero; cannot normalize")
        normalized = {key: float(val / best) for key, val in exact.items()}
    return WelfareMatrix(
        reference=reference_format,
        reference_voters=n_ref,
        entries=entries,
        normalized=normalized,
    )
