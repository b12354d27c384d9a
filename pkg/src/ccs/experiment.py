"""Run orchestration: corpus -> pairs -> route -> assemble -> substrate -> annotate -> log."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .annotate import parse_response
from .corpus import (
    BASELINE,
    ApplicabilityFilter,
    ConditionPair,
    Item,
    apply_ambiguity,
    expand_conditions,
    load_ambiguity,
    load_items,
    sample_per_subject,
)
from .profile import CapabilityProfile, resolve_profile
from .router import RoutingDirective, route
from .runlog import RunLogError, RunManifest, append_records, latest_by_key, read_log, write_manifest
from .scaffold import TEMPLATE_VERSION, assemble_baseline, assemble_prompt
from .stats import TrialRecord, digest_text
from .substrate import (
    RateLimitExhaustedError,
    Substrate,
    SubstrateConfig,
    SubstrateError,
    SubstrateTimeoutError,
    UpstreamUnavailableError,
)

log = logging.getLogger(__name__)

LOG_NAME = "run.jsonl"
MARKER_NOTE = (
    "note: activation is detected from explicit [CCS:...] markers defined by this tool; "
    "the marker grammar is a stand-in, not the original study's detector"
)
EXHAUSTION_ERRORS = (RateLimitExhaustedError, SubstrateTimeoutError, UpstreamUnavailableError)


class RunConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    corpus_paths: Sequence[Path | str]
    profiles: Sequence[str]
    substrates: Sequence[SubstrateConfig]
    out_dir: Path | str
    conditions: Sequence[str] | None = None
    seed: int = 0
    sample_per_subject: int | None = None
    ambiguity_path: Path | str | None = None
    pair_filter: str = "none"
    resume: bool = False
    capture_requests: bool = False
    items: Sequence[Item] | None = None


@dataclass
class RunResult:
    log_path: Path
    manifest: RunManifest
    written: int = 0
    skipped: int = 0
    errors: list[TrialRecord] = field(default_factory=list)

    @property
    def exhausted(self) -> bool:
        return any(
            (r.error or {}).get("kind") in {e.__name__ for e in EXHAUSTION_ERRORS} for r in self.errors
        )


@dataclass(frozen=True)
class _Job:
    pair: ConditionPair
    substrate_id: str
    directive: RoutingDirective | None


def corpus_digest(items: Sequence[Item]) -> str:
    h = hashlib.sha256()
    for item in sorted(items, key=lambda i: i.id):
        h.update(repr(sorted(item.to_dict().items())).encode())
    return "sha256:" + h.hexdigest()


def _load_corpus(config: RunConfig) -> list[Item]:
    if config.items is not None:
        items = list(config.items)
    else:
        items = []
        for path in config.corpus_paths:
            items.extend(load_items(path))
    if config.ambiguity_path:
        items = apply_ambiguity(items, load_ambiguity(config.ambiguity_path))
    if config.sample_per_subject:
        items = sample_per_subject(items, config.sample_per_subject, config.seed)
    return sorted(items, key=lambda i: i.id)


def prepare(config: RunConfig) -> tuple[RunManifest, dict[str, CapabilityProfile], list[_Job], dict[str, Substrate]]:
    """Validate everything and route every pair before any substrate is called."""
    if not config.substrates:
        raise RunConfigError("at least one substrate is required")
    profiles = {}
    for ref in config.profiles:
        p = resolve_profile(ref)
        profiles[p.id] = p
    conditions = list(config.conditions or [BASELINE, *profiles])
    for cond in conditions:
        if cond != BASELINE and cond not in profiles:
            raise RunConfigError(f"condition {cond!r} names no loaded profile")
    items = _load_corpus(config)

    if config.pair_filter == "applicability":
        if not profiles:
            raise RunConfigError("applicability filter needs at least one profile")
        plist = list(profiles.values())
        flt = ApplicabilityFilter(plist[0], tuple(plist[1:]))
    elif config.pair_filter == "none":
        flt = None
    else:
        raise RunConfigError(f"unknown pair filter {config.pair_filter!r}")
    pairs = expand_conditions(items, conditions, flt)

    substrates = {}
    for sc in config.substrates:
        if sc.substrate_id in substrates:
            raise RunConfigError(f"duplicate substrate id {sc.substrate_id!r}")
        sub = Substrate(sc)
        sub.check_credentials()
        substrates[sc.substrate_id] = sub

    jobs = []
    for pair in pairs:
        directive = None
        if pair.profile_id is not None:
            directive = route(
                profiles[pair.profile_id], pair.item.subject, pair.item.prompt_text, ambiguous=pair.item.ambiguous
            )
        for sid in substrates:
            jobs.append(_Job(pair, sid, directive))

    raw = len(items) * len(conditions)
    manifest = RunManifest(
        corpus_digest=corpus_digest(items),
        profile_ids=tuple(profiles),
        conditions=tuple(conditions),
        substrates=tuple(sc.describe() for sc in config.substrates),
        seeds={"sample": config.seed},
        pair_counts={"raw": raw, "filtered_out": raw - len(pairs), "kept": len(pairs), "trials": len(jobs)},
        template_version=TEMPLATE_VERSION,
        pair_filter=config.pair_filter,
        notes=(MARKER_NOTE,),
    )
    return manifest, profiles, jobs, substrates


def _execute(job: _Job, profiles: dict[str, CapabilityProfile], substrate: Substrate, capture: bool) -> TrialRecord:
    item = job.pair.item
    if job.directive is None:
        envelope = assemble_baseline(item)
    else:
        envelope = assemble_prompt(profiles[job.pair.profile_id], job.directive, item)
    common = dict(
        item_id=item.id,
        subject=item.subject,
        condition=job.pair.condition,
        profile_id=job.pair.profile_id,
        substrate_id=job.substrate_id,
        directive=job.directive,
        template_version=envelope.template_version,
        timestamp=datetime.now(timezone.utc).isoformat(),
        request={"messages": envelope.messages()} if capture else None,
    )
    try:
        resp = substrate.complete(envelope)
    except SubstrateError as exc:
        log.error("trial %s/%s/%s failed: %s", job.pair.condition, item.id, job.substrate_id, exc)
        return TrialRecord(
            annotation=None,
            raw_response_digest=None,
            error={"kind": type(exc).__name__, "message": str(exc), "attempts": exc.attempts},
            **common,
        )
    return TrialRecord(
        annotation=parse_response(resp.text),
        raw_response=resp.text,
        raw_response_digest=digest_text(resp.text),
        **common,
    )


def execute_run(config: RunConfig, max_trials: int | None = None) -> RunResult:
    """Execute (or resume) a run. ``max_trials`` stops early, for interruption testing."""
    manifest, profiles, jobs, substrates = prepare(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / LOG_NAME

    done: set[tuple[str, str, str]] = set()
    if log_path.exists() and config.resume:
        old_manifest, old_records = read_log(log_path)
        if old_manifest is None or old_manifest.run_id != manifest.run_id:
            raise RunLogError(f"{log_path}: existing log belongs to a different run configuration")
        done = {r.key for r in latest_by_key(old_records) if r.completed}
    elif log_path.exists():
        raise RunLogError(f"{log_path} exists; pass resume to continue it or choose another output directory")
    else:
        write_manifest(log_path, manifest)

    pending = [j for j in jobs if (j.pair.condition, j.pair.item.id, j.substrate_id) not in done]
    if max_trials is not None:
        pending = pending[:max_trials]
    result = RunResult(log_path, manifest, skipped=len(jobs) - len(pending))

    for sid, substrate in substrates.items():
        mine = [j for j in pending if j.substrate_id == sid]
        width = substrate.config.parallelism_limit
        batch = max(1, width * 4)
        with ThreadPoolExecutor(max_workers=width) as pool:
            for start in range(0, len(mine), batch):
                chunk = mine[start : start + batch]
                records = list(
                    pool.map(lambda j: _execute(j, profiles, substrate, config.capture_requests), chunk)
                )
                append_records(log_path, records)
                result.written += len(records)
                result.errors.extend(r for r in records if not r.completed)
    return result
