"""Append-only JSONL run logs: a manifest line followed by one line per trial."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

from . import __version__
from .stats import TrialRecord

VOLATILE_FIELDS = ("timestamp",)


class RunLogError(ValueError):
    pass


@dataclass(frozen=True)
class RunManifest:
    corpus_digest: str
    profile_ids: tuple[str, ...]
    conditions: tuple[str, ...]
    substrates: tuple[dict[str, Any], ...]
    seeds: dict[str, int]
    pair_counts: dict[str, int]
    template_version: str
    tool_version: str = __version__
    pair_filter: str = "none"
    notes: tuple[str, ...] = ()
    run_id: str = field(default="")

    def __post_init__(self) -> None:
        if not self.run_id:
            body = {k: v for k, v in self.to_dict().items() if k not in ("run_id", "type")}
            digest = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()
            object.__setattr__(self, "run_id", digest[:16])

    @property
    def substrate_ids(self) -> list[str]:
        return [s["substrate_id"] for s in self.substrates]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["type"] = "manifest"
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunManifest":
        d = {k: v for k, v in d.items() if k != "type"}
        for key in ("profile_ids", "conditions", "substrates", "notes"):
            d[key] = tuple(d.get(key, ()))
        return cls(**d)

    def header_lines(self) -> list[str]:
        return [
            f"run_id: {self.run_id}",
            f"corpus_digest: {self.corpus_digest}",
            f"profiles: {', '.join(self.profile_ids)}",
            f"conditions: {', '.join(self.conditions)}",
            f"substrates: {', '.join(self.substrate_ids)}",
            f"seeds: {json.dumps(self.seeds, sort_keys=True)}",
            f"pairs: {json.dumps(self.pair_counts, sort_keys=True)}",
            f"template_version: {self.template_version}",
            f"tool_version: {self.tool_version}",
            *self.notes,
        ]


def _dumps(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def write_manifest(path: Path, manifest: RunManifest) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dumps(manifest.to_dict()) + "\n", encoding="utf-8")


def append_records(path: Path, records: Iterable[TrialRecord]) -> None:
    with path.open("a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(_dumps(rec.to_dict()) + "\n")
        fh.flush()


def read_log(path: str | Path) -> tuple[RunManifest | None, list[TrialRecord]]:
    """Read a run log. A truncated final line (crash mid-write) is ignored."""
    path = Path(path)
    manifest = None
    records: list[TrialRecord] = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            if lineno == len(lines):
                break
            raise RunLogError(f"{path}:{lineno}: invalid JSON") from None
        kind = obj.get("type")
        if kind == "manifest":
            manifest = RunManifest.from_dict(obj)
        elif kind == "trial":
            records.append(TrialRecord.from_dict(obj))
        else:
            raise RunLogError(f"{path}:{lineno}: unknown record type {kind!r}")
    return manifest, records


def latest_by_key(records: Iterable[TrialRecord]) -> list[TrialRecord]:
    """Collapse retried trials: a completed record wins over an error for the same key."""
    best: dict[tuple[str, str, str], TrialRecord] = {}
    for rec in records:
        prev = best.get(rec.key)
        if prev is None or rec.completed or not prev.completed:
            best[rec.key] = rec
    return list(best.values())


def pair_digest(key: tuple[str, str, str]) -> str:
    return hashlib.sha256("\x1f".join(key).encode()).hexdigest()[:20]


def run_digest(path: str | Path) -> str:
    """Content digest of a run, ignoring timestamps and the order trials were written in."""
    manifest, records = read_log(path)
    h = hashlib.sha256()
    if manifest is not None:
        h.update(_dumps(manifest.to_dict()).encode())
    for rec in sorted(latest_by_key(records), key=lambda r: r.key):
        d = rec.to_dict()
        for name in VOLATILE_FIELDS:
            d.pop(name, None)
        h.update(_dumps(d).encode())
    return h.hexdigest()
