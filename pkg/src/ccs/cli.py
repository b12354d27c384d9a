"""Command-line entry point: ``ccs validate|route|run|stats|report``.

Exit codes: 0 success, 1 I/O, 2 validation, 3 substrate failure exhaustion.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .corpus import BASELINE, CorpusError, apply_ambiguity, load_ambiguity, load_items
from .experiment import RunConfig, RunConfigError, execute_run
from .profile import ProfileError, load_profile, resolve_profile
from .report import (
    ReportError,
    compute_statistics,
    emit_heatmap_data,
    render_cross_substrate,
    render_mixed_divergence,
    render_profile_inversion,
    render_statistics_json,
)
from .router import UndeclaredDomainError, route
from .runlog import RunLogError, read_log
from .substrate import SubstrateAuthError, SubstrateConfig, SubstrateError, mock_config

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_SUBSTRATE = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_validate(args) -> int:
    try:
        profile = load_profile(args.profile)
    except OSError as exc:
        _err(f"{args.profile}: {exc.strerror or exc}")
        return EXIT_IO
    except ProfileError as exc:
        _err(f"{args.profile}: {exc}")
        return EXIT_VALIDATION
    counts = ", ".join(f"{n}={len(getattr(profile, n))}" for n in ("strong", "mixed", "weak"))
    print(f"ok: {profile.id} ({counts}, threshold={profile.alignment_threshold}, undeclared={profile.undeclared_policy.value})")
    return EXIT_OK


def cmd_route(args) -> int:
    try:
        profile = resolve_profile(args.profile)
        items = []
        for path in args.corpus:
            items.extend(load_items(path))
        if args.ambiguity:
            items = apply_ambiguity(items, load_ambiguity(args.ambiguity))
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (ProfileError, CorpusError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    print("item_id\tsubject\tpartition\tlevel\trationale\tverdict\tscore")
    for item in sorted(items, key=lambda i: i.id):
        try:
            d = route(profile, item.subject, item.prompt_text, ambiguous=item.ambiguous)
        except UndeclaredDomainError as exc:
            _err(str(exc))
            return EXIT_VALIDATION
        print(
            f"{item.id}\t{item.subject}\t{d.partition.value}\t{d.level_hint}\t{d.rationale}"
            f"\t{d.alignment.verdict.value}\t{d.alignment.score:.3f}"
        )
    return EXIT_OK


def _substrate_from_arg(spec: str) -> SubstrateConfig:
    """``mock``, ``mock:<id>``, or a path to a JSON substrate config."""
    if spec == "mock":
        return mock_config()
    if spec.startswith("mock:"):
        return mock_config(spec.split(":", 1)[1])
    doc = json.loads(Path(spec).read_text(encoding="utf-8"))
    return SubstrateConfig.from_dict(doc)


def cmd_run(args) -> int:
    try:
        substrates = [_substrate_from_arg(s) for s in (args.substrate or ["mock"])]
        conditions = None
        if args.conditions:
            conditions = [c.strip() for c in args.conditions.split(",") if c.strip()]
            # allow builtin ids in any case
            profiles = {resolve_profile(p).id.lower(): resolve_profile(p).id for p in args.profile}
            conditions = [c if c == BASELINE else profiles.get(c.lower(), c) for c in conditions]
        config = RunConfig(
            corpus_paths=args.corpus,
            profiles=args.profile,
            substrates=substrates,
            out_dir=args.out,
            conditions=conditions,
            seed=args.seed,
            sample_per_subject=args.sample,
            ambiguity_path=args.ambiguity,
            pair_filter=args.filter,
            resume=args.resume,
            capture_requests=args.capture_requests,
        )
        result = execute_run(config, max_trials=args.max_trials)
    except (OSError, RunLogError) as exc:
        _err(str(exc))
        return EXIT_IO
    except SubstrateAuthError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except (ProfileError, CorpusError, RunConfigError, UndeclaredDomainError, SubstrateError, ValueError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    print(
        f"run {result.manifest.run_id}: wrote {result.written} trial(s), skipped {result.skipped}, "
        f"{len(result.errors)} error(s) -> {result.log_path}"
    )
    if result.errors:
        return EXIT_SUBSTRATE
    return EXIT_OK


def _load_log(path: str):
    manifest, records = read_log(path)
    if not records:
        raise ReportError(f"{path}: run log has no trial records")
    return manifest, records


def cmd_stats(args) -> int:
    try:
        manifest, records = _load_log(args.log)
        stats = compute_statistics(records, manifest, args.permutations, args.seed, args.substrate)
        text = render_statistics_json(stats)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "stats.json").write_text(text, encoding="utf-8")
            print(f"wrote {out / 'stats.json'}")
        else:
            sys.stdout.write(text)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (ReportError, RunLogError, ValueError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_report(args) -> int:
    ext = args.format
    try:
        manifest, records = _load_log(args.log)
        docs = {}
        tables = args.tables or ["inversion", "mixed", "substrates", "heatmap"]
        if "inversion" in tables:
            docs[f"table2_profile_inversion.{ext}"] = render_profile_inversion(
                records, manifest, substrate=args.substrate, fmt=ext
            )
        if "mixed" in tables:
            docs[f"table3_mixed_divergence.{ext}"] = render_mixed_divergence(
                records, manifest, substrate=args.substrate, fmt=ext
            )
            if any(r.condition == BASELINE for r in records):
                docs[f"table3_mixed_divergence_baseline.{ext}"] = render_mixed_divergence(
                    records, manifest, condition=BASELINE, substrate=args.substrate, fmt=ext
                )
        if "substrates" in tables:
            docs[f"table4_cross_substrate.{ext}"] = render_cross_substrate(records, manifest, fmt=ext)
        if "heatmap" in tables:
            docs["heatmap.csv"] = emit_heatmap_data(records, manifest, args.substrate)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (ReportError, RunLogError, ValueError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    if args.out:
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            for name, text in docs.items():
                (out / name).write_text(text, encoding="utf-8")
        except OSError as exc:
            _err(str(exc))
            return EXIT_IO
        for name in docs:
            print(f"wrote {out / name}")
    else:
        for name, text in docs.items():
            print(f"=== {name}")
            sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a capability profile file")
    p.add_argument("profile", nargs="?")
    p.add_argument("--profile", dest="profile_opt")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("route", help="print routing directives without calling a substrate")
    p.add_argument("--profile", required=True, help="builtin id (pcs-nlp, pcs-litprof) or profile path")
    p.add_argument("--corpus", required=True, action="append")
    p.add_argument("--ambiguity", help="sidecar JSON of item id -> ambiguous flag")
    p.add_argument("--dry-run", action="store_true", help="accepted for symmetry; route never calls substrates")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("run", help="execute a run and append trials to <out>/run.jsonl")
    p.add_argument("--profile", action="append", required=True)
    p.add_argument("--corpus", action="append", required=True)
    p.add_argument("--conditions", help="comma list, e.g. baseline,PCS-NLP,PCS-LitProf")
    p.add_argument("--substrate", action="append", help="mock, mock:<id>, or substrate config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample", type=int, help="items sampled per subject")
    p.add_argument("--ambiguity")
    p.add_argument("--filter", choices=["none", "applicability"], default="none")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--capture-requests", action="store_true")
    p.add_argument("--max-trials", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("stats", help="compute rates, Fisher and permutation tests from a run log")
    p.add_argument("log")
    p.add_argument("--permutations", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--substrate")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="render tables from a run log")
    p.add_argument("log")
    p.add_argument("--format", choices=["md", "csv"], default="md")
    p.add_argument("--table", dest="tables", action="append", choices=["inversion", "mixed", "substrates", "heatmap"])
    p.add_argument("--substrate")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        args.profile = args.profile or args.profile_opt
        if not args.profile:
            _err("validate needs a profile path")
            return EXIT_VALIDATION
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
