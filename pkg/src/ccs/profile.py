"""Typed capability profiles: a strong/mixed/weak partition of domains."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

_LABEL_RE = re.compile(r"^[a-z0-9_]+$")
_SEPARATORS = re.compile(r"[^a-z0-9]+")

ALLOWED_KEYS = frozenset(
    {"id", "strong", "mixed", "weak", "vocabulary", "alignment_threshold", "undeclared_policy"}
)
BUILTIN_FILES = ("pcs-nlp.json", "pcs-litprof.json")


class ProfileError(ValueError):
    """Base class for profile validation failures."""


class ProfileSchemaError(ProfileError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class PartitionOverlapError(ProfileError):
    def __init__(self, label: str, sets: tuple[str, ...]):
        self.label = label
        self.sets = sets
        super().__init__(f"domain {label!r} declared in more than one partition: {', '.join(sets)}")


class ThresholdRangeError(ProfileError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"alignment_threshold: {value} is outside [0, 1]")


class Partition(enum.Enum):
    STRONG = "strong"
    MIXED = "mixed"
    WEAK = "weak"
    UNDECLARED = "undeclared"


class UndeclaredPolicy(enum.Enum):
    TREAT_AS_WEAK = "treat_as_weak"
    REJECT = "reject"


def normalize_label(raw: str) -> str:
    """Normalize a domain name to ``lower_snake`` form.

    ``"Machine Learning"``, ``"machine-learning"`` and ``"machine_learning"`` all
    map to ``"machine_learning"``. Idempotent.
    """
    label = _SEPARATORS.sub("_", raw.strip().lower()).strip("_")
    if not label or not _LABEL_RE.match(label):
        raise ValueError(f"cannot normalize {raw!r} to a domain label")
    return label


def _safe_normalize(label: str) -> str | None:
    try:
        return normalize_label(label)
    except ValueError:
        return None


@dataclass(frozen=True)
class CapabilityProfile:
    id: str
    strong: frozenset[str] = frozenset()
    mixed: frozenset[str] = frozenset()
    weak: frozenset[str] = frozenset()
    vocabulary: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    alignment_threshold: float = 0.5
    undeclared_policy: UndeclaredPolicy = UndeclaredPolicy.TREAT_AS_WEAK

    def __post_init__(self) -> None:
        for name in ("strong", "mixed", "weak"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        object.__setattr__(
            self, "vocabulary", {k: tuple(v) for k, v in dict(self.vocabulary).items()}
        )
        sets = {"strong": self.strong, "mixed": self.mixed, "weak": self.weak}
        seen: dict[str, list[str]] = {}
        for name, labels in sets.items():
            for label in labels:
                if not isinstance(label, str) or label != _safe_normalize(label):
                    raise ProfileSchemaError(name, f"label {label!r} is not in lower_snake form")
                seen.setdefault(label, []).append(name)
        for label in sorted(seen):
            if len(seen[label]) > 1:
                raise PartitionOverlapError(label, tuple(seen[label]))
        if not seen:
            raise ProfileSchemaError("strong/mixed/weak", "all three partitions are empty")
        if not 0.0 <= self.alignment_threshold <= 1.0:
            raise ThresholdRangeError(self.alignment_threshold)
        for key in self.vocabulary:
            if key not in seen:
                raise ProfileSchemaError(
                    f"vocabulary.{key}", "vocabulary key is not declared in any partition"
                )

    def classify(self, label: str) -> Partition:
        return classify_domain(self, label)

    def terms_for(self, partitions: set[Partition]) -> frozenset[str]:
        """Lowercased vocabulary terms belonging to domains in ``partitions``."""
        domains: set[str] = set()
        if Partition.STRONG in partitions:
            domains |= self.strong
        if Partition.MIXED in partitions:
            domains |= self.mixed
        if Partition.WEAK in partitions:
            domains |= self.weak
        return frozenset(t for d in domains for t in self.vocabulary.get(d, ()))

    def to_dict(self) -> dict[str, Any]:
        """Canonical, JSON-ready form. Sorted so serialization is stable."""
        doc: dict[str, Any] = {
            "id": self.id,
            "strong": sorted(self.strong),
            "mixed": sorted(self.mixed),
            "weak": sorted(self.weak),
        }
        if self.vocabulary:
            doc["vocabulary"] = {k: list(self.vocabulary[k]) for k in sorted(self.vocabulary)}
        doc["alignment_threshold"] = self.alignment_threshold
        doc["undeclared_policy"] = self.undeclared_policy.value
        return doc

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False, ensure_ascii=False)


def classify_domain(profile: CapabilityProfile, label: str) -> Partition:
    if label in profile.strong:
        return Partition.STRONG
    if label in profile.mixed:
        return Partition.MIXED
    if label in profile.weak:
        return Partition.WEAK
    return Partition.UNDECLARED


def _label_list(doc: Mapping[str, Any], key: str) -> frozenset[str]:
    raw = doc.get(key, [])
    if not isinstance(raw, list):
        raise ProfileSchemaError(key, "expected an array of strings")
    labels = []
    for i, item in enumerate(raw):
        if not isinstance(item, str):
            raise ProfileSchemaError(f"{key}[{i}]", "expected a string")
        try:
            labels.append(normalize_label(item))
        except ValueError as exc:
            raise ProfileSchemaError(f"{key}[{i}]", str(exc)) from None
    return frozenset(labels)


def profile_from_dict(doc: Any) -> CapabilityProfile:
    if not isinstance(doc, dict):
        raise ProfileSchemaError("$", "profile document must be an object")
    unknown = sorted(set(doc) - ALLOWED_KEYS)
    if unknown:
        raise ProfileSchemaError(unknown[0], "unknown key")
    if not isinstance(doc.get("id"), str) or not doc["id"].strip():
        raise ProfileSchemaError("id", "required non-empty string")

    strong = _label_list(doc, "strong")
    mixed = _label_list(doc, "mixed")
    weak = _label_list(doc, "weak")

    raw_vocab = doc.get("vocabulary", {})
    if not isinstance(raw_vocab, dict):
        raise ProfileSchemaError("vocabulary", "expected an object of label -> array of strings")
    vocabulary: dict[str, tuple[str, ...]] = {}
    for key, terms in raw_vocab.items():
        if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
            raise ProfileSchemaError(f"vocabulary.{key}", "expected an array of strings")
        try:
            label = normalize_label(key)
        except ValueError as exc:
            raise ProfileSchemaError(f"vocabulary.{key}", str(exc)) from None
        vocabulary[label] = tuple(t.strip().lower() for t in terms if t.strip())

    threshold = doc.get("alignment_threshold", 0.5)
    if isinstance(threshold, bool) or not isinstance(threshold, (int, float)):
        raise ProfileSchemaError("alignment_threshold", "expected a number")

    policy_raw = doc.get("undeclared_policy", UndeclaredPolicy.TREAT_AS_WEAK.value)
    try:
        policy = UndeclaredPolicy(policy_raw)
    except ValueError:
        raise ProfileSchemaError(
            "undeclared_policy", f"expected one of {[p.value for p in UndeclaredPolicy]}"
        ) from None

    return CapabilityProfile(
        id=doc["id"].strip(),
        strong=strong,
        mixed=mixed,
        weak=weak,
        vocabulary=vocabulary,
        alignment_threshold=float(threshold),
        undeclared_policy=policy,
    )


def parse_profile(document: str) -> CapabilityProfile:
    """Parse and validate a JSON profile document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ProfileSchemaError("$", f"not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return profile_from_dict(doc)


def load_profile(path: str | Path) -> CapabilityProfile:
    return parse_profile(Path(path).read_text(encoding="utf-8"))


def builtin_profiles() -> list[CapabilityProfile]:
    """The two bundled profiles, PCS-NLP then PCS-LitProf."""
    pkg = resources.files("ccs") / "profiles"
    return [parse_profile((pkg / name).read_text(encoding="utf-8")) for name in BUILTIN_FILES]


def builtin_profile_path(name: str) -> Path:
    return Path(str(resources.files("ccs") / "profiles" / name))


def resolve_profile(ref: str) -> CapabilityProfile:
    """Accept a builtin id (case-insensitive, e.g. ``pcs-nlp``) or a file path."""
    for profile in builtin_profiles():
        if profile.id.lower() == ref.lower():
            return profile
    return load_profile(ref)
