"""Deterministic intervention routing with a lexical consistency guardrail."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Any

from .profile import CapabilityProfile, Partition, UndeclaredPolicy, classify_domain

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")

SILENT, LIGHT_FLAG, CONDITIONAL_SCAFFOLD, FULL_SCAFFOLD = 0, 1, 2, 3

# Stable reason codes carried in RoutingDirective.rationale.
STRONG_SILENT = "strong_silent"
STRONG_AMBIGUOUS = "strong_ambiguous"
MIXED_ALIGNED = "mixed_aligned"
MIXED_NO_EVIDENCE = "mixed_no_evidence"
MIXED_MISALIGNED = "mixed_misaligned"
WEAK_FULL = "weak_full"
UNDECLARED_DEFAULT = "undeclared_default"


class UndeclaredDomainError(LookupError):
    def __init__(self, profile_id: str, subject: str):
        self.profile_id = profile_id
        self.subject = subject
        super().__init__(f"subject {subject!r} is not declared in profile {profile_id!r}")


class Verdict(enum.Enum):
    ALIGNED = "aligned"
    MISALIGNED = "misaligned"
    NO_EVIDENCE = "no_evidence"


@dataclass(frozen=True)
class AlignmentReport:
    score: float
    matched_strong_terms: tuple[str, ...]
    matched_offpartition_terms: tuple[str, ...]
    threshold: float
    verdict: Verdict

    def to_dict(self) -> dict[str, Any]:
        return {
            "score": self.score,
            "matched_strong_terms": list(self.matched_strong_terms),
            "matched_offpartition_terms": list(self.matched_offpartition_terms),
            "threshold": self.threshold,
            "verdict": self.verdict.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AlignmentReport":
        return cls(
            score=d["score"],
            matched_strong_terms=tuple(d["matched_strong_terms"]),
            matched_offpartition_terms=tuple(d["matched_offpartition_terms"]),
            threshold=d["threshold"],
            verdict=Verdict(d["verdict"]),
        )


@dataclass(frozen=True)
class RoutingDirective:
    subject: str
    partition: Partition
    level_hint: int
    alignment: AlignmentReport
    rationale: str

    @property
    def fires(self) -> bool:
        return self.level_hint >= 1

    @property
    def effective_partition(self) -> Partition:
        """Partition as presented to the substrate; undeclared is escalated as weak."""
        return Partition.WEAK if self.partition is Partition.UNDECLARED else self.partition

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject": self.subject,
            "partition": self.partition.value,
            "level_hint": self.level_hint,
            "alignment": self.alignment.to_dict(),
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RoutingDirective":
        return cls(
            subject=d["subject"],
            partition=Partition(d["partition"]),
            level_hint=d["level_hint"],
            alignment=AlignmentReport.from_dict(d["alignment"]),
            rationale=d["rationale"],
        )


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def _match_terms(tokens: list[str], terms: frozenset[str]) -> list[str]:
    """Every occurrence of each term in ``tokens``; multi-word terms match as phrases."""
    hits: list[str] = []
    singles = {t for t in terms if " " not in t}
    hits.extend(tok for tok in tokens if tok in singles)
    for phrase in sorted(terms - singles):
        parts = tokenize(phrase)
        width = len(parts)
        for i in range(len(tokens) - width + 1):
            if tokens[i : i + width] == parts:
                hits.append(phrase)
    return hits


def assess_alignment(
    profile: CapabilityProfile, prompt_text: str, partition: Partition | None = None
) -> AlignmentReport:
    """Score how much a prompt's vocabulary sits inside the declared strong domains.

    score = strong_hits / (strong_hits + off_partition_hits + 1). A term listed under
    both a strong and a non-strong domain counts as strong. The score does not depend
    on ``partition``; it is accepted so callers can log what partition was assessed.
    """
    del partition
    if not prompt_text.strip():
        raise ValueError("prompt_text must be non-empty")
    strong_terms = profile.terms_for({Partition.STRONG})
    off_terms = profile.terms_for({Partition.MIXED, Partition.WEAK}) - strong_terms
    tokens = tokenize(prompt_text)
    strong_hits = _match_terms(tokens, strong_terms)
    off_hits = _match_terms(tokens, off_terms)
    threshold = profile.alignment_threshold

    if not strong_hits and not off_hits:
        return AlignmentReport(0.0, (), (), threshold, Verdict.NO_EVIDENCE)
    s, o = len(strong_hits), len(off_hits)
    score = min(1.0, max(0.0, s / (s + o + 1)))
    verdict = Verdict.ALIGNED if s > 0 and score >= threshold else Verdict.MISALIGNED
    return AlignmentReport(score, tuple(strong_hits), tuple(off_hits), threshold, verdict)


def level_for(partition: Partition, verdict: Verdict, ambiguous: bool = False) -> tuple[int, str]:
    """The decision matrix. Undeclared is handled by the caller per policy."""
    if partition is Partition.STRONG:
        return (LIGHT_FLAG, STRONG_AMBIGUOUS) if ambiguous else (SILENT, STRONG_SILENT)
    if partition is Partition.MIXED:
        if verdict is Verdict.ALIGNED:
            return SILENT, MIXED_ALIGNED
        if verdict is Verdict.NO_EVIDENCE:
            return LIGHT_FLAG, MIXED_NO_EVIDENCE
        return CONDITIONAL_SCAFFOLD, MIXED_MISALIGNED
    if partition is Partition.WEAK:
        return FULL_SCAFFOLD, WEAK_FULL
    return FULL_SCAFFOLD, UNDECLARED_DEFAULT


def route(
    profile: CapabilityProfile, subject: str, prompt_text: str, *, ambiguous: bool = False
) -> RoutingDirective:
    partition = classify_domain(profile, subject)
    if (
        partition is Partition.UNDECLARED
        and profile.undeclared_policy is UndeclaredPolicy.REJECT
    ):
        raise UndeclaredDomainError(profile.id, subject)
    alignment = assess_alignment(profile, prompt_text, partition)
    level, reason = level_for(partition, alignment.verdict, ambiguous)
    return RoutingDirective(subject, partition, level, alignment, reason)
