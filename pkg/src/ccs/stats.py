"""Activation rates, Fisher exact tests, Wilson intervals and matched-pair permutation tests."""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist
from typing import Any, Callable, Hashable, Iterable, Sequence

import numpy as np

from .annotate import InterventionAnnotation
from .corpus import BASELINE
from .profile import Partition
from .router import RoutingDirective


def digest_text(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TrialRecord:
    item_id: str
    subject: str
    condition: str
    substrate_id: str
    directive: RoutingDirective | None
    annotation: InterventionAnnotation | None
    raw_response_digest: str | None
    raw_response: str | None = None
    profile_id: str | None = None
    template_version: str = ""
    timestamp: str = ""
    error: dict[str, Any] | None = None
    request: dict[str, Any] | None = None

    @property
    def completed(self) -> bool:
        return self.error is None and self.annotation is not None

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.condition, self.item_id, self.substrate_id)

    def digest_ok(self) -> bool:
        if self.raw_response is None:
            return True
        return digest_text(self.raw_response) == self.raw_response_digest

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "trial",
            "item_id": self.item_id,
            "subject": self.subject,
            "condition": self.condition,
            "profile_id": self.profile_id,
            "substrate_id": self.substrate_id,
            "template_version": self.template_version,
            "directive": self.directive.to_dict() if self.directive else None,
            "annotation": self.annotation.to_dict() if self.annotation else None,
            "raw_response": self.raw_response,
            "raw_response_digest": self.raw_response_digest,
            "error": self.error,
            "request": self.request,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrialRecord":
        return cls(
            item_id=d["item_id"],
            subject=d["subject"],
            condition=d["condition"],
            substrate_id=d["substrate_id"],
            directive=RoutingDirective.from_dict(d["directive"]) if d.get("directive") else None,
            annotation=InterventionAnnotation.from_dict(d["annotation"]) if d.get("annotation") else None,
            raw_response_digest=d.get("raw_response_digest"),
            raw_response=d.get("raw_response"),
            profile_id=d.get("profile_id"),
            template_version=d.get("template_version", ""),
            timestamp=d.get("timestamp", ""),
            error=d.get("error"),
            request=d.get("request"),
        )


# -- rates -------------------------------------------------------------------


@dataclass(frozen=True)
class RateSummary:
    fired: int
    total: int
    rate: float
    wilson95: tuple[float, float]
    mean_level: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.fired <= self.total:
            raise ValueError(f"need 0 <= k <= n, got k={self.fired}, n={self.total}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "fired": self.fired,
            "total": self.total,
            "rate": self.rate,
            "wilson95": list(self.wilson95),
            "mean_level": self.mean_level,
        }


def summarize(levels: Sequence[int]) -> RateSummary:
    n = len(levels)
    k = sum(1 for lv in levels if lv >= 1)
    return RateSummary(k, n, k / n, wilson_ci(k, n), sum(levels) / n)


def activation_rate(
    records: Iterable[TrialRecord],
    group_key: Callable[[TrialRecord], Hashable],
    groups: Iterable[Hashable] | None = None,
) -> dict[Hashable, RateSummary]:
    """Fired counts per group over completed trials.

    If ``groups`` is given, the output is restricted to those groups in that order and any
    group with no records is dropped with a warning.
    """
    levels: dict[Hashable, list[int]] = {}
    for rec in records:
        if not rec.completed:
            continue
        key = group_key(rec)
        if key is None:
            continue
        levels.setdefault(key, []).append(rec.annotation.level)
    if groups is None:
        order = list(levels)
    else:
        order = list(groups)
        empty = [g for g in order if g not in levels]
        if empty:
            warnings.warn(f"omitting empty groups: {empty}", stacklevel=2)
        order = [g for g in order if g in levels]
    return {g: summarize(levels[g]) for g in order}


# -- Wilson interval -----------------------------------------------------------


def wilson_ci(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("wilson_ci needs n > 0")
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = k / n
    z2 = z * z
    denom = 1 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, min(p, center - half))
    hi = 1.0 if k == n else min(1.0, max(p, center + half))
    return lo, hi


# -- Fisher exact --------------------------------------------------------------


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Rows are conditions, columns are (fired, not fired)."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        cells = (self.a, self.b, self.c, self.d)
        if any(not isinstance(x, int) or x < 0 for x in cells):
            raise ValueError(f"cells must be non-negative integers, got {cells}")
        if sum(cells) == 0:
            raise ValueError("table total must be positive")

    @classmethod
    def from_rates(cls, first: RateSummary, second: RateSummary) -> "ContingencyTable2x2":
        return cls(first.fired, first.total - first.fired, second.fired, second.total - second.fired)


@dataclass(frozen=True)
class FisherResult:
    p_exact: Fraction
    degenerate: bool = False

    @property
    def p_value(self) -> float:
        return float(self.p_exact)


def fisher_exact(table: ContingencyTable2x2) -> FisherResult:
    """Two-sided Fisher exact test, summing tables no more probable than the observed one.

    All arithmetic is on integers: table weights C(c1, x) C(n - c1, r1 - x) share the
    denominator C(n, r1), so comparison and summation are exact.
    """
    a, b, c, d = table.a, table.b, table.c, table.d
    r1, r2, c1, c2 = a + b, c + d, a + c, b + d
    n = r1 + r2
    if 0 in (r1, r2, c1, c2):
        return FisherResult(Fraction(1), degenerate=True)
    lo, hi = max(0, r1 - c2), min(r1, c1)

    def weight(x: int) -> int:
        return math.comb(c1, x) * math.comb(c2, r1 - x)

    observed = weight(a)
    tail = sum(w for w in (weight(x) for x in range(lo, hi + 1)) if w <= observed)
    return FisherResult(Fraction(tail, math.comb(n, r1)))


# -- matched-pair permutation test ----------------------------------------------

_RANK = {Partition.STRONG: 0, Partition.MIXED: 1, Partition.WEAK: 2, Partition.UNDECLARED: 2}


class UnmatchedPairError(ValueError):
    def __init__(self, offending: list[tuple[str, str]]):
        self.offending = offending
        super().__init__(f"pairs do not share an item id: {offending}")


@dataclass(frozen=True)
class PermResult:
    observed_stat: float
    n_permutations: int
    exceed_count: int
    p_value: float
    seed: int
    n_pairs: int = 0
    measure: str = "level"

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _rank(record: TrialRecord) -> int:
    return 0 if record.directive is None else _RANK[record.directive.partition]


def expected_direction(rec_a: TrialRecord, rec_b: TrialRecord) -> int:
    """+1 where B's declared partition should escalate relative to A, -1 for the reverse."""
    diff = _rank(rec_b) - _rank(rec_a)
    return (diff > 0) - (diff < 0)


def _measure(rec: TrialRecord, measure: str) -> int:
    if not rec.completed:
        raise ValueError(f"trial {rec.key} has no annotation")
    if measure == "level":
        return rec.annotation.level
    if measure == "fired":
        return int(rec.annotation.fired)
    raise ValueError(f"unknown measure {measure!r}")


def match_pairs(
    records: Iterable[TrialRecord], condition_a: str, condition_b: str, substrate_id: str | None = None
) -> list[tuple[TrialRecord, TrialRecord]]:
    by_key: dict[tuple[str, str, str], TrialRecord] = {}
    for rec in records:
        if rec.completed and (substrate_id is None or rec.substrate_id == substrate_id):
            by_key[rec.key] = rec
    pairs = []
    for (cond, item, sub), rec_a in sorted(by_key.items()):
        if cond != condition_a:
            continue
        rec_b = by_key.get((condition_b, item, sub))
        if rec_b is not None:
            pairs.append((rec_a, rec_b))
    return pairs


def permutation_test(
    pairs: Sequence[tuple[TrialRecord, TrialRecord]],
    n_permutations: int = 10_000,
    seed: int = 0,
    measure: str = "level",
    chunk: int = 2_000,
) -> PermResult:
    """Sign-flip permutation test on direction-signed intensity differences.

    The statistic is mean_i s_i (x_B,i - x_A,i) with s_i the expected escalation
    direction of pair i. Under the null each pair's labels are swapped independently.
    p = (#{|T_perm| >= |T_obs|} + 1) / (n_permutations + 1).
    """
    if not pairs:
        raise ValueError("permutation_test needs at least one pair")
    offending = [(a.item_id, b.item_id) for a, b in pairs if a.item_id != b.item_id]
    if offending:
        raise UnmatchedPairError(offending)
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")

    ordered = sorted(pairs, key=lambda p: (p[0].item_id, p[0].substrate_id, p[0].condition, p[1].condition))
    diffs = np.array(
        [expected_direction(a, b) * (_measure(b, measure) - _measure(a, measure)) for a, b in ordered],
        dtype=np.int64,
    )
    observed = int(abs(diffs.sum()))

    rng = np.random.Generator(np.random.Philox(seed))
    exceed = 0
    done = 0
    while done < n_permutations:
        size = min(chunk, n_permutations - done)
        signs = rng.integers(0, 2, size=(size, diffs.size), dtype=np.int64) * 2 - 1
        exceed += int(np.count_nonzero(np.abs(signs @ diffs) >= observed))
        done += size

    return PermResult(
        observed_stat=float(diffs.sum()) / diffs.size,
        n_permutations=n_permutations,
        exceed_count=exceed,
        p_value=(exceed + 1) / (n_permutations + 1),
        seed=seed,
        n_pairs=int(diffs.size),
        measure=measure,
    )


def profile_conditions(records: Iterable[TrialRecord]) -> list[str]:
    seen: list[str] = []
    for rec in records:
        if rec.condition != BASELINE and rec.condition not in seen:
            seen.append(rec.condition)
    return seen
