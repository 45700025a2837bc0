"""File formats: instance documents, profile tables, and report exports.

An instance is a JSON document::

    {"schema": 1, "name": "small-a", "budget": 500000,
     "projects": [{"id": "laundry", "name": "...", "description": "...",
                   "category": "Culture and community", "cost": 50000,
                   "coordinates": [[25, 45]]}]}

A profile is a CSV table preceded by ``# key: value`` header lines::

    # format: kapproval
    # election: small-a
    # k: 5
    voter_id,consistent,ballot
    v001,1,laundry;computers

Ballot payloads are ``;``-separated: project ids for the approval-style
formats, ``id:points`` pairs for points, and ordered ids (best first) for
the ranking formats.  The ``consistent`` column is optional.

Four real elections are bundled as package data; ``load_election`` returns
them by name.
"""

from __future__ import annotations

import csv
import io as _io
import json
import warnings
from fractions import Fraction
from importlib import resources
from typing import Mapping, Sequence

from .analysis import StabilityReport, WelfareMatrix
from .core import (
    ApprovalBallot,
    Ballot,
    BallotFormat,
    CATEGORIES,
    InputError,
    Instance,
    Outcome,
    PointsBallot,
    Profile,
    Project,
    RankingBallot,
    validate_ballot,
)

INSTANCE_SCHEMA = 1
ELECTIONS = ("small-a", "small-b", "large-a", "large-b")

_ITEM_SEP = ";"
_POINTS_SEP = ":"


class ParseError(InputError):
    """A document failed to parse; carries every issue with its location."""

    def __init__(self, issues: Sequence[tuple[str, str]]):
        self.issues = list(issues)
        detail = "; ".join(f"{where}: {what}" for where, what in self.issues)
        super().__init__(f"parse failed ({detail})")


def parse_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError([(f"line {exc.lineno} col {exc.colno}", exc.msg)]) from None
    issues: list[tuple[str, str]] = []
    if not isinstance(doc, dict):
        raise ParseError([("document", "expected a JSON object")])
    if doc.get("schema") != INSTANCE_SCHEMA:
        issues.append(("schema", f"expected schema {INSTANCE_SCHEMA}"))
    budget = doc.get("budget")
    if not isinstance(budget, int) or budget <= 0:
        issues.append(("budget", "must be a positive integer"))
    raw_projects = doc.get("projects")
    if not isinstance(raw_projects, list):
        issues.append(("projects", "must be a list"))
        raw_projects = []
    projects = []
    seen_ids = set()
    for idx, raw in enumerate(raw_projects):
        where = f"projects[{idx}]"
        if not isinstance(raw, dict):
            issues.append((where, "expected an object"))
            continue
        pid = raw.get("id")
        if not isinstance(pid, str) or not pid:
            issues.append((f"{where}.id", "must be a non-empty string"))
            continue
        if pid in seen_ids:
            issues.append((f"{where}.id", f"duplicate project id {pid!r}"))
            continue
        seen_ids.add(pid)
        cost = raw.get("cost")
        if not isinstance(cost, int) or cost <= 0:
            issues.append((f"{where}.cost", "must be a positive integer"))
            continue
        category = raw.get("category")
        if category not in CATEGORIES:
            issues.append((f"{where}.category", f"unknown category {category!r}"))
            continue
        coords = raw.get("coordinates", [])
        pairs = []
        coords_ok = True
        for c in coords:
            if (
                not isinstance(c, (list, tuple))
                or len(c) != 2
                or not all(isinstance(v, int) and 0 <= v <= 100 for v in c)
            ):
                issues.append(
                    (f"{where}.coordinates", f"bad coordinate pair {c!r}")
                )
                coords_ok = False
                break
            pairs.append((c[0], c[1]))
        if not coords_ok:
            continue
        projects.append(
            Project(
                id=pid,
                name=str(raw.get("name", pid)),
                category=category,
                cost=cost,
                coordinates=tuple(pairs),
                description=str(raw.get("description", "")),
            )
        )
    if issues:
        raise ParseError(issues)
    return Instance(
        projects=tuple(projects), budget=budget, name=str(doc.get("name", ""))
    )


def serialize_instance(instance: Instance) -> str:
    doc = {
        "schema": INSTANCE_SCHEMA,
        "name": instance.name,
        "budget": instance.budget,
        "projects": [
            {
                "id": p.id,
                "name": p.name,
                "description": p.description,
                "category": p.category,
                "cost": p.cost,
                "coordinates": [list(c) for c in p.coordinates],
            }
            for p in instance.projects
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_election(name: str) -> Instance:
    """One of the four bundled elections: small-a, small-b, large-a, large-b."""
    if name not in ELECTIONS:
        raise InputError(f"unknown election {name!r}; choose from {ELECTIONS}")
    text = (
        resources.files("pbvote.data")
        .joinpath(name.replace("-", "_") + ".json")
        .read_text(encoding="utf-8")
    )
    return parse_instance(text)


def _parse_payload(fmt: BallotFormat, payload: str) -> Ballot:
    tokens = [tok.strip() for tok in payload.split(_ITEM_SEP) if tok.strip()]
    if fmt is BallotFormat.POINTS:
        points = {}
        for tok in tokens:
            pid, sep, raw = tok.partition(_POINTS_SEP)
            if not sep:
                raise ValueError(f"expected id{_POINTS_SEP}points, got {tok!r}")
            try:
                pts = int(raw)
            except ValueError:
                raise ValueError(f"non-integer points in {tok!r}") from None
            if pid in points:
                raise ValueError(f"project {pid!r} listed twice")
            points[pid] = pts
        return PointsBallot(points=points)
    if fmt in (BallotFormat.RANK_VALUE, BallotFormat.RANK_VFM):
        return RankingBallot(ranking=tuple(tokens), format=fmt)
    return ApprovalBallot(approved=frozenset(tokens), format=fmt)


def _ballot_payload(ballot: Ballot) -> str:
    if isinstance(ballot, PointsBallot):
        items = sorted((p, v) for p, v in ballot.points.items() if v)
        return _ITEM_SEP.join(f"{p}{_POINTS_SEP}{v}" for p, v in items)
    if isinstance(ballot, RankingBallot):
        return _ITEM_SEP.join(ballot.ranking)
    return _ITEM_SEP.join(sorted(ballot.approved))


def parse_profile(text: str, instance: Instance) -> Profile:
    """Parse and fully validate a profile table.

    Row errors are collected, not fail-fast; the raised ParseError lists
    every offending row by line number.
    """
    header: dict[str, str] = {}
    lines = text.splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith("#"):
            key, sep, value = stripped.lstrip("#").partition(":")
            if sep:
                header[key.strip().lower()] = value.strip()
            body_start = i + 1
        elif stripped:
            break
        else:
            body_start = i + 1

    issues: list[tuple[str, str]] = []
    fmt_tag = header.get("format")
    try:
        fmt = BallotFormat(fmt_tag)
    except ValueError:
        raise ParseError(
            [("header", f"missing or unknown format tag {fmt_tag!r}")]
        ) from None
    k = t = None
    for param in ("k", "t"):
        if param in header:
            try:
                value = int(header[param])
            except ValueError:
                issues.append(("header", f"{param} must be an integer"))
                continue
            if param == "k":
                k = value
            else:
                t = value
    if fmt is BallotFormat.KAPPROVAL and k is None:
        issues.append(("header", "k-approval profiles require '# k: <int>'"))
    if fmt is BallotFormat.TAPPROVAL and t is None:
        issues.append(("header", "threshold profiles require '# t: <int>'"))
    if issues:
        raise ParseError(issues)

    body = "\n".join(lines[body_start:])
    reader = csv.DictReader(_io.StringIO(body))
    fieldnames = reader.fieldnames or []
    if "voter_id" not in fieldnames or "ballot" not in fieldnames:
        raise ParseError(
            [("header row", "columns 'voter_id' and 'ballot' are required")]
        )
    has_consistency = "consistent" in fieldnames

    ballots: list[tuple[str, Ballot]] = []
    consistent: set[str] = set()
    seen: set[str] = set()
    for row_no, row in enumerate(reader, start=body_start + 2):
        where = f"line {row_no}"
        voter = (row.get("voter_id") or "").strip()
        if not voter:
            issues.append((where, "missing voter_id"))
            continue
        if voter in seen:
            issues.append((where, f"duplicate voter id {voter!r}"))
            continue
        seen.add(voter)
        try:
            ballot = _parse_payload(fmt, row.get("ballot") or "")
        except ValueError as exc:
            issues.append((where, str(exc)))
            continue
        violation = validate_ballot(instance, ballot, k=k, t=t)
        if violation is not None:
            issues.append((where, str(violation)))
            continue
        ballots.append((voter, ballot))
        if has_consistency:
            flag = (row.get("consistent") or "").strip().lower()
            if flag in ("1", "true", "yes"):
                consistent.add(voter)
    if issues:
        raise ParseError(issues)
    if not ballots:
        warnings.warn("profile has no ballots", stacklevel=2)
    return Profile(
        instance=instance,
        format=fmt,
        ballots=tuple(ballots),
        k=k,
        t=t,
        election=header.get("election", instance.name),
        consistent=frozenset(consistent) if has_consistency else None,
    )


def serialize_profile(profile: Profile) -> str:
    out = _io.StringIO()
    out.write(f"# format: {profile.format.value}\n")
    if profile.election:
        out.write(f"# election: {profile.election}\n")
    if profile.k is not None:
        out.write(f"# k: {profile.k}\n")
    if profile.t is not None:
        out.write(f"# t: {profile.t}\n")
    has_consistency = profile.consistent is not None
    writer = csv.writer(out, lineterminator="\n")
    if has_consistency:
        writer.writerow(["voter_id", "consistent", "ballot"])
    else:
        writer.writerow(["voter_id", "ballot"])
    for voter, ballot in profile.ballots:
        payload = _ballot_payload(ballot)
        if has_consistency:
            flag = "1" if voter in profile.consistent else "0"
            writer.writerow([voter, flag, payload])
        else:
            writer.writerow([voter, payload])
    return out.getvalue()


def _fraction_str(value: Fraction) -> str:
    return str(Fraction(value))


def outcome_to_dict(outcome: Outcome, instance: Instance) -> dict:
    doc = {
        "rule": outcome.rule,
        "funded": sorted(outcome.funded),
        "total_cost": instance.total_cost(outcome.funded),
        "budget": instance.budget,
        "leftover": _fraction_str(outcome.leftover),
    }
    if outcome.payments is not None:
        doc["payments"] = {
            pid: {voter: _fraction_str(x) for voter, x in sorted(by.items())}
            for pid, by in sorted(outcome.payments.items())
        }
    if outcome.trace:
        doc["trace"] = [
            {"project": s.project, "price": _fraction_str(s.price), "phase": s.phase}
            for s in outcome.trace
        ]
    return doc


def export_report(report: StabilityReport) -> dict:
    """JSON-ready stability report with a full configuration echo."""
    c = report.config
    return {
        "election": c.election,
        "format": c.format.value,
        "rule": c.rule,
        "nprime": c.nprime,
        "repetitions": c.repetitions,
        "master_seed": c.master_seed,
        "pool": c.pool,
        "counts": {pid: report.counts[pid] for pid in sorted(report.counts)},
        "frequencies": {
            pid: float(f) for pid, f in sorted(report.frequencies.items())
        },
        "entropy": report.entropy,
        "sample_digests": list(report.sample_digests),
        **(
            {"funded_sets": [sorted(s) for s in report.funded_sets]}
            if report.funded_sets is not None
            else {}
        ),
    }


def welfare_to_rows(matrix: WelfareMatrix) -> list[list[object]]:
    header = ["format", "rule", "welfare"]
    if matrix.normalized is not None:
        header.append("normalized")
    rows: list[list[object]] = [header]
    for (fmt, rule), value in sorted(
        matrix.entries.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
    ):
        row: list[object] = [fmt.value, rule, value]
        if matrix.normalized is not None:
            row.append(matrix.normalized[(fmt, rule)])
        rows.append(row)
    return rows


def write_csv(path, rows: Sequence[Sequence[object]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def write_json(path, doc: Mapping) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
