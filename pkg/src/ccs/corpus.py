"""Question corpora, evaluation subsets, condition expansion and persona scenarios."""

from __future__ import annotations

import csv
import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .profile import CapabilityProfile, Partition, classify_domain, normalize_label

BASELINE = "baseline"
ANSWER_LETTERS = "ABCD"
ZONES = ("strong_zone", "risk_zone", "outside_zone")

# MMLU ships files as <subject>_{dev,val,test}.csv
_SPLIT_SUFFIX = re.compile(r"_(dev|val|test|train)$")


class CorpusError(ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class InsufficientItemsError(CorpusError):
    pass


@dataclass(frozen=True)
class Item:
    """A benchmark question. Open-ended persona prompts carry no choices."""

    id: str
    subject: str
    question: str
    choices: tuple[str, ...] = ()
    answer_index: int | None = None
    ambiguous: bool = False

    def __post_init__(self) -> None:
        if self.choices:
            if len(self.choices) != 4:
                raise CorpusError(f"item {self.id}: expected 4 choices, got {len(self.choices)}")
            if self.answer_index is None or not 0 <= self.answer_index <= 3:
                raise CorpusError(f"item {self.id}: answer_index must be in 0..3")
        elif self.answer_index is not None:
            raise CorpusError(f"item {self.id}: answer_index given without choices")

    @property
    def prompt_text(self) -> str:
        """Question plus options, as used for routing evidence."""
        return "\n".join([self.question, *self.choices])

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "subject": self.subject,
            "question": self.question,
            "choices": list(self.choices),
            "answer_index": self.answer_index,
            "ambiguous": self.ambiguous,
        }


@dataclass(frozen=True)
class ConditionPair:
    item: Item
    condition: str

    @property
    def profile_id(self) -> str | None:
        return None if self.condition == BASELINE else self.condition


PairFilter = Callable[[str, str], bool]
"""``(subject, condition) -> keep``."""


@dataclass(frozen=True)
class Persona:
    role: str
    zones: dict[str, tuple[str, ...]]

    def items(self) -> list[Item]:
        out = []
        for zone in ZONES:
            subject = normalize_label(f"{self.role}_{zone}")
            for i, prompt in enumerate(self.zones[zone], start=1):
                out.append(Item(id=f"{subject}_{i:03d}", subject=subject, question=prompt))
        return out


def subject_from_filename(path: str | Path) -> str:
    stem = _SPLIT_SUFFIX.sub("", Path(path).stem)
    return normalize_label(stem)


def _answer_index(raw, path: str, line: int) -> int:
    if isinstance(raw, int) and not isinstance(raw, bool):
        idx = raw
    elif isinstance(raw, str) and raw.strip().upper() in ANSWER_LETTERS and raw.strip():
        idx = ANSWER_LETTERS.index(raw.strip().upper())
    elif isinstance(raw, str) and raw.strip().isdigit():
        idx = int(raw.strip())
    else:
        raise CorpusError(f"unrecognized answer {raw!r}", path, line)
    if not 0 <= idx <= 3:
        raise CorpusError(f"answer index {idx} out of range", path, line)
    return idx


def _load_csv(path: Path) -> list[Item]:
    subject = subject_from_filename(path)
    items = []
    with path.open(newline="", encoding="utf-8") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 6:
                raise CorpusError(
                    f"expected question, 4 choices and answer (6 fields), got {len(row)}",
                    str(path),
                    line,
                )
            question, *choices, answer = row
            items.append(
                Item(
                    id=f"{subject}_{line:04d}",
                    subject=subject,
                    question=question,
                    choices=tuple(choices),
                    answer_index=_answer_index(answer, str(path), line),
                )
            )
    return items


def _load_jsonl(path: Path) -> list[Item]:
    default_subject = subject_from_filename(path)
    items = []
    with path.open(encoding="utf-8") as fh:
        for line, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON ({exc.msg})", str(path), line) from None
            if not isinstance(rec, dict) or "question" not in rec:
                raise CorpusError("record must be an object with a 'question'", str(path), line)
            choices = rec.get("choices", [])
            if not isinstance(choices, list) or len(choices) not in (0, 4):
                raise CorpusError(f"expected 4 choices, got {len(choices)}", str(path), line)
            answer = rec.get("answer", rec.get("answer_index"))
            subject = normalize_label(rec["subject"]) if rec.get("subject") else default_subject
            items.append(
                Item(
                    id=str(rec.get("id") or f"{subject}_{line:04d}"),
                    subject=subject,
                    question=rec["question"],
                    choices=tuple(choices),
                    answer_index=_answer_index(answer, str(path), line) if choices else None,
                    ambiguous=bool(rec.get("ambiguous", False)),
                )
            )
    return items


def load_items(path: str | Path, format: str | None = None) -> list[Item]:
    """Load MMLU-style CSV or JSONL items, sorted by id."""
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        items = _load_csv(path)
    elif fmt in ("jsonl", "json"):
        items = _load_jsonl(path)
    else:
        raise CorpusError(f"unsupported corpus format {fmt!r}", str(path))
    ids = [i.id for i in items]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})[0]
        raise CorpusError(f"duplicate item id {dup!r}", str(path))
    return sorted(items, key=lambda i: i.id)


def load_ambiguity(path: str | Path) -> dict[str, bool]:
    """Sidecar file: JSON object mapping item id to an ambiguity flag."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or not all(isinstance(v, bool) for v in doc.values()):
        raise CorpusError("ambiguity sidecar must map item ids to booleans", str(path))
    return doc


def apply_ambiguity(items: Iterable[Item], flags: dict[str, bool]) -> list[Item]:
    out = []
    for item in items:
        if item.id in flags:
            item = Item(
                item.id, item.subject, item.question, item.choices, item.answer_index, flags[item.id]
            )
        out.append(item)
    return out


def sample_subset(items: Sequence[Item], n: int, seed: int) -> list[Item]:
    if n > len(items):
        raise InsufficientItemsError(f"requested {n} items but only {len(items)} available")
    pool = sorted(items, key=lambda i: i.id)
    return sorted(random.Random(seed).sample(pool, n), key=lambda i: i.id)


def sample_per_subject(items: Sequence[Item], n: int, seed: int) -> list[Item]:
    by_subject: dict[str, list[Item]] = {}
    for item in items:
        by_subject.setdefault(item.subject, []).append(item)
    out = []
    for subject in sorted(by_subject):
        out.extend(sample_subset(by_subject[subject], n, seed))
    return sorted(out, key=lambda i: i.id)


def expand_conditions(
    items: Sequence[Item], conditions: Sequence[str], filter: PairFilter | None = None
) -> list[ConditionPair]:
    if not conditions:
        raise ValueError("at least one condition is required")
    pairs = [ConditionPair(item, cond) for item in items for cond in conditions]
    if filter is not None:
        pairs = [p for p in pairs if filter(p.item.subject, p.condition)]
    return pairs


@dataclass(frozen=True)
class ApplicabilityFilter:
    """Keep baseline pairs for subjects mixed under every profile, all pairs for the
    reference profile, and only partition-changing subjects for the other profiles.

    On the ten-subset, three-condition design this keeps 16 of 30 subject-condition
    cells (480 of 900 pairs at 30 items per subset). The rule is a guess; the original
    filter is not published.
    """

    reference: CapabilityProfile
    others: tuple[CapabilityProfile, ...] = field(default_factory=tuple)

    def __call__(self, subject: str, condition: str) -> bool:
        profiles = (self.reference, *self.others)
        if condition == BASELINE:
            return all(classify_domain(p, subject) is Partition.MIXED for p in profiles)
        if condition == self.reference.id:
            return True
        for other in self.others:
            if condition == other.id:
                mine = classify_domain(other, subject)
                ref = classify_domain(self.reference, subject)
                return mine is not Partition.UNDECLARED and mine is not ref
        return True


def load_personas(path: str | Path | None = None) -> list[Persona]:
    """Persona corpus: JSON array of ``{"role", "zones": {strong_zone, risk_zone, outside_zone}}``.

    With no path, loads the three bundled example personas.
    """
    if path is None:
        text = (resources.files("ccs") / "data" / "personas.json").read_text(encoding="utf-8")
        where = "personas.json"
    else:
        text = Path(path).read_text(encoding="utf-8")
        where = str(path)
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise CorpusError("persona corpus must be an array", where)
    personas = []
    for i, rec in enumerate(doc):
        if not isinstance(rec, dict) or not isinstance(rec.get("role"), str):
            raise CorpusError(f"persona [{i}] needs a string 'role'", where)
        zones = rec.get("zones")
        if not isinstance(zones, dict):
            raise CorpusError(f"persona {rec['role']!r} needs a 'zones' object", where)
        missing = [z for z in ZONES if z not in zones]
        if missing:
            raise CorpusError(f"persona {rec['role']!r} missing zone(s): {', '.join(missing)}", where)
        extra = sorted(set(zones) - set(ZONES))
        if extra:
            raise CorpusError(f"persona {rec['role']!r} has unknown zone(s): {', '.join(extra)}", where)
        personas.append(Persona(rec["role"], {z: tuple(zones[z]) for z in ZONES}))
    return personas
