"""Convert externally published vote tables into the profile format.

Published participatory-budgeting datasets come as flat CSV files whose
column names and payload encodings vary, so the mapping is configuration
rather than code: the caller names the voter/vote/consistency columns, the
payload style, and (optionally) a JSON map from the dataset's project
labels to instance ids.  The converted text round-trips through
``parse_profile``, so the output is fully validated before it is written.
"""

from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass

from .core import BallotFormat, InputError, Instance
from .io import parse_profile


@dataclass(frozen=True)
class ColumnMap:
    voter: str = "voter_id"
    vote: str = "vote"
    consistent: str | None = None
    item_sep: str = ";"
    points_sep: str = ":"


def _map_token(token: str, project_map: dict[str, str]) -> str:
    return project_map.get(token, token)


def convert_votes(
    text: str,
    instance: Instance,
    fmt: BallotFormat,
    *,
    columns: ColumnMap = ColumnMap(),
    project_map: dict[str, str] | None = None,
    election: str = "",
    k: int | None = None,
    t: int | None = None,
) -> str:
    """Rewrite a raw vote CSV as profile text (validated)."""
    project_map = project_map or {}
    reader = csv.DictReader(_io.StringIO(text))
    fields = reader.fieldnames or []
    for needed in filter(None, (columns.voter, columns.vote, columns.consistent)):
        if needed not in fields:
            raise InputError(f"input table has no column {needed!r}")

    out = _io.StringIO()
    out.write(f"# format: {fmt.value}\n")
    if election:
        out.write(f"# election: {election}\n")
    if k is not None:
        out.write(f"# k: {k}\n")
    if t is not None:
        out.write(f"# t: {t}\n")
    writer = csv.writer(out, lineterminator="\n")
    header = ["voter_id", "ballot"]
    if columns.consistent:
        header = ["voter_id", "consistent", "ballot"]
    writer.writerow(header)
    for row in reader:
        voter = (row.get(columns.voter) or "").strip()
        raw = (row.get(columns.vote) or "").strip()
        tokens = [tok.strip() for tok in raw.split(columns.item_sep) if tok.strip()]
        if fmt is BallotFormat.POINTS:
            parts = []
            for tok in tokens:
                label, sep, pts = tok.rpartition(columns.points_sep)
                if not sep:
                    raise InputError(f"voter {voter!r}: expected label:points, got {tok!r}")
                parts.append(f"{_map_token(label, project_map)}:{pts}")
            payload = ";".join(parts)
        else:
            payload = ";".join(_map_token(tok, project_map) for tok in tokens)
        if columns.consistent:
            flag = (row.get(columns.consistent) or "").strip().lower()
            flag = "1" if flag in ("1", "true", "yes", "passed") else "0"
            writer.writerow([voter, flag, payload])
        else:
            writer.writerow([voter, payload])
    converted = out.getvalue()
    parse_profile(converted, instance)  # validation round trip
    return converted


def load_project_map(text: str) -> dict[str, str]:
    doc = json.loads(text)
    if not isinstance(doc, dict) or not all(
        isinstance(key, str) and isinstance(value, str) for key, value in doc.items()
    ):
        raise InputError("project map must be a JSON object of string pairs")
    return doc
