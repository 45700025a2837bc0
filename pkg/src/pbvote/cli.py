"""Command-line front door: aggregate, stability, welfare, adapt, election.

Outputs are a pure function of the input files, flags, and --seed; every
run writes a manifest with input hashes so results can be reproduced.
Exit codes: 0 success, 1 computation error, 2 input error.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from . import __version__
from .adapter import ColumnMap, convert_votes, load_project_map
from .aggregation import RULES, aggregate
from .analysis import (
    DEFAULT_REPETITIONS,
    DEFAULT_SAMPLE_SIZES,
    cross_format_welfare,
    entropy_comparison,
    entropy_table,
    frequency_heatmap,
    run_stability,
)
from .core import BallotFormat, ComputationError, InputError, PBError, derive_valuations
from .io import (
    ELECTIONS,
    export_report,
    load_election,
    outcome_to_dict,
    parse_instance,
    parse_profile,
    serialize_instance,
    welfare_to_rows,
    write_csv,
    write_json,
)

EXIT_OK = 0
EXIT_COMPUTATION = 1
EXIT_INPUT = 2


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(outdir: Path, args, inputs: list[str], outputs: list[str]):
    write_json(
        outdir / "manifest.json",
        {
            "tool": "pbvote",
            "version": __version__,
            "command": args.command,
            "argv": sys.argv[1:],
            "seed": getattr(args, "seed", None),
            "inputs": {path: _sha256(path) for path in inputs},
            "outputs": sorted(outputs),
        },
    )


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_instance(args):
    return parse_instance(_read(args.instance))


def _load_profiles(args, instance):
    profiles = []
    for path in args.profile:
        profiles.append((path, parse_profile(_read(path), instance)))
    return profiles


def _rules(arg: str) -> list[str]:
    return ["greedy", "mes"] if arg == "all" else [arg]


def cmd_aggregate(args) -> int:
    instance = _load_instance(args)
    outdir = _outdir(args)
    outputs = []
    for path, profile in _load_profiles(args, instance):
        valuations = derive_valuations(profile)
        for rule in _rules(args.rule):
            outcome = aggregate(rule, instance, valuations)
            doc = outcome_to_dict(outcome, instance)
            doc["election"] = profile.election
            doc["format"] = profile.format.value
            name = f"aggregate_{profile.format.value}_{rule}.json"
            write_json(outdir / name, doc)
            outputs.append(name)
    _write_manifest(outdir, args, [args.instance] + args.profile, outputs)
    return EXIT_OK


def cmd_stability(args) -> int:
    instance = _load_instance(args)
    outdir = _outdir(args)
    sizes = args.nprime or list(DEFAULT_SAMPLE_SIZES)
    rules = _rules(args.rule)
    outputs = []
    all_reports = []
    for _, profile in _load_profiles(args, instance):
        for nprime in sizes:
            reports = run_stability(
                profile, rules, nprime, args.reps, args.seed
            )
            for rule, report in reports.items():
                all_reports.append(report)
                name = f"stability_{profile.format.value}_{rule}_n{nprime}.json"
                write_json(outdir / name, export_report(report))
                outputs.append(name)
    for rule in rules:
        for nprime in sizes:
            group = [
                r
                for r in all_reports
                if r.config.rule == rule and r.config.nprime == nprime
            ]
            name = f"heatmap_{rule}_n{nprime}.csv"
            write_csv(outdir / name, frequency_heatmap(group, instance))
            outputs.append(name)
    write_csv(outdir / "entropy.csv", entropy_table(all_reports))
    outputs.append("entropy.csv")
    if set(rules) >= {"greedy", "mes"}:
        write_json(outdir / "comparison.json", entropy_comparison(all_reports))
        outputs.append("comparison.json")
    _write_manifest(outdir, args, [args.instance] + args.profile, outputs)
    return EXIT_OK


def _profile_election(text: str) -> str:
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped.startswith("#"):
            break
        key, sep, value = stripped.lstrip("#").partition(":")
        if sep and key.strip().lower() == "election":
            return value.strip()
    return ""


def cmd_welfare(args) -> int:
    instances = {}
    for path in args.instance:
        instance = parse_instance(_read(path))
        instances[instance.name] = instance
    by_election: dict[str, dict[BallotFormat, object]] = {}
    for path in args.profile:
        text = _read(path)
        election = _profile_election(text)
        if election not in instances:
            if len(instances) != 1:
                raise InputError(
                    f"profile {path}: election {election!r} matches no provided instance"
                )
            election = next(iter(instances))
        profile = parse_profile(text, instances[election])
        by_election.setdefault(election, {})[profile.format] = profile

    reference = BallotFormat(args.reference_format)
    rules = _rules(args.rule) + (["optimal"] if args.with_optimal else [])
    matrices = []
    for name in sorted(by_election):
        profiles = by_election[name]
        if reference not in profiles:
            raise InputError(f"election {name}: no profile for reference format {reference}")
        matrices.append(
            cross_format_welfare(
                profiles, rules, reference, normalize=args.normalize
            )
        )

    # formats present in every election can be averaged; others are dropped
    shared = set.intersection(*(set(f for f, _ in m.entries) for m in matrices))
    dropped = sorted(
        {f.value for m in matrices for f, _ in m.entries} - {f.value for f in shared}
    )
    if dropped:
        print(f"warning: formats {dropped} absent from some election; rows omitted", file=sys.stderr)

    outdir = _outdir(args)
    averaged = {}
    normalized = {} if args.normalize else None
    for fmt in shared:
        for rule in rules:
            key = (fmt, rule)
            averaged[key] = sum(m.entries[key] for m in matrices) / len(matrices)
            if normalized is not None:
                normalized[key] = sum(m.normalized[key] for m in matrices) / len(matrices)
    header = ["format", "rule", "welfare"] + (["normalized"] if args.normalize else [])
    rows = [header]
    for (fmt, rule) in sorted(averaged, key=lambda k: (k[0].value, k[1])):
        row = [fmt.value, rule, averaged[(fmt, rule)]]
        if args.normalize:
            row.append(normalized[(fmt, rule)])
        rows.append(row)
    write_csv(outdir / "welfare.csv", rows)
    doc = {
        "reference_format": reference.value,
        "elections": sorted(by_election),
        "normalize": args.normalize,
        "per_election": [
            {
                "election": name,
                "rows": welfare_to_rows(matrix)[1:],
            }
            for name, matrix in zip(sorted(by_election), matrices)
        ],
        "averaged_rows": [list(r) for r in rows[1:]],
    }
    write_json(outdir / "welfare.json", doc)
    _write_manifest(
        outdir, args, list(args.instance) + list(args.profile), ["welfare.csv", "welfare.json"]
    )
    return EXIT_OK


def cmd_adapt(args) -> int:
    instance = _load_instance(args)
    project_map = load_project_map(_read(args.project_map)) if args.project_map else None
    converted = convert_votes(
        _read(args.input),
        instance,
        BallotFormat(args.format),
        columns=ColumnMap(
            voter=args.voter_column,
            vote=args.vote_column,
            consistent=args.consistent_column,
            item_sep=args.vote_delimiter,
        ),
        project_map=project_map,
        election=args.election or instance.name,
        k=args.k,
        t=args.t,
    )
    Path(args.out).write_text(converted, encoding="utf-8")
    return EXIT_OK


def cmd_election(args) -> int:
    instance = load_election(args.name)
    text = serialize_instance(instance)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbvote",
        description="Participatory budgeting aggregation and stability analysis",
    )
    parser.add_argument("--version", action="version", version=f"pbvote {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    agg = sub.add_parser("aggregate", help="run rules on full profiles")
    agg.add_argument("--instance", required=True)
    agg.add_argument("--profile", action="append", required=True)
    agg.add_argument("--rule", choices=sorted(RULES) + ["all"], default="all")
    agg.add_argument("--out", required=True)
    agg.set_defaults(fn=cmd_aggregate)

    stab = sub.add_parser("stability", help="seeded subsampling experiment")
    stab.add_argument("--instance", required=True)
    stab.add_argument("--profile", action="append", required=True)
    stab.add_argument("--rule", choices=["greedy", "mes", "all"], default="all")
    stab.add_argument("--nprime", action="append", type=int)
    stab.add_argument("--reps", type=int, default=DEFAULT_REPETITIONS)
    stab.add_argument("--seed", type=int, required=True)
    stab.add_argument("--out", required=True)
    stab.set_defaults(fn=cmd_stability)

    wel = sub.add_parser("welfare", help="cross-format welfare matrix")
    wel.add_argument("--instance", action="append", required=True)
    wel.add_argument("--profile", action="append", required=True)
    wel.add_argument("--rule", choices=["greedy", "mes", "all"], default="all")
    wel.add_argument("--reference-format", required=True)
    wel.add_argument("--with-optimal", action="store_true")
    wel.add_argument("--normalize", action="store_true")
    wel.add_argument("--out", required=True)
    wel.set_defaults(fn=cmd_welfare)

    adapt = sub.add_parser("adapt", help="convert an external vote table")
    adapt.add_argument("--input", required=True)
    adapt.add_argument("--instance", required=True)
    adapt.add_argument("--format", required=True, choices=[f.value for f in BallotFormat])
    adapt.add_argument("--voter-column", default="voter_id")
    adapt.add_argument("--vote-column", default="vote")
    adapt.add_argument("--consistent-column")
    adapt.add_argument("--vote-delimiter", default=";")
    adapt.add_argument("--project-map")
    adapt.add_argument("--election", default="")
    adapt.add_argument("--k", type=int)
    adapt.add_argument("--t", type=int)
    adapt.add_argument("--out", required=True)
    adapt.set_defaults(fn=cmd_adapt)

    elec = sub.add_parser("election", help="dump a bundled election instance")
    elec.add_argument("name", choices=ELECTIONS)
    elec.add_argument("--out")
    elec.set_defaults(fn=cmd_election)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ComputationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    except PBError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
