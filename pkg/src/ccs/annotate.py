"""Parse substrate responses into intervention annotations.

Only explicit ``[CCS:...]`` markers count. Any ``[CCS:`` fragment that does not parse
is treated as a level-1 firing with ``well_formed=False``, so formatting drift inflates
rather than hides intervention counts.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Any

_PREFIX = "[CCS:"
_INTERVENTION = re.compile(
    r"\[CCS:INTERVENTION level=([0-3]) partition=(strong|mixed|weak) domain=([a-z0-9_]+)\]"
)
_FLAG_MARKERS = {"[CCS:UNCERTAINTY]": "uncertainty", "[CCS:BOUNDARY]": "boundary"}
FALLBACK_LEVEL = 1


class Marker(enum.Enum):
    INTERVENTION = "intervention"
    UNCERTAINTY = "uncertainty"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class InterventionAnnotation:
    fired: bool
    level: int
    markers: frozenset[Marker]
    well_formed: bool
    raw_marker_lines: tuple[str, ...]
    partition: str | None = None
    domain: str | None = None

    @property
    def needs_review(self) -> bool:
        return not self.well_formed

    def to_dict(self) -> dict[str, Any]:
        return {
            "fired": self.fired,
            "level": self.level,
            "markers": sorted(m.value for m in self.markers),
            "well_formed": self.well_formed,
            "raw_marker_lines": list(self.raw_marker_lines),
            "partition": self.partition,
            "domain": self.domain,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "InterventionAnnotation":
        return cls(
            fired=d["fired"],
            level=d["level"],
            markers=frozenset(Marker(m) for m in d["markers"]),
            well_formed=d["well_formed"],
            raw_marker_lines=tuple(d["raw_marker_lines"]),
            partition=d.get("partition"),
            domain=d.get("domain"),
        )


SILENT = InterventionAnnotation(False, 0, frozenset(), True, ())


def parse_response(text: str) -> InterventionAnnotation:
    if _PREFIX not in text:
        return SILENT

    levels: list[int] = []
    markers: set[Marker] = set()
    raw_lines: list[str] = []
    partition = domain = None
    malformed = False

    for line in text.splitlines():
        if _PREFIX not in line:
            continue
        raw_lines.append(line)
        stripped = line.strip()
        if stripped in _FLAG_MARKERS:
            markers.add(Marker(_FLAG_MARKERS[stripped]))
            continue
        m = _INTERVENTION.fullmatch(stripped)
        if m:
            levels.append(int(m.group(1)))
            markers.add(Marker.INTERVENTION)
            partition, domain = m.group(2), m.group(3)
            continue
        malformed = True

    if len(levels) > 1:
        malformed = True
    if markers - {Marker.INTERVENTION} and Marker.INTERVENTION not in markers:
        malformed = True

    if levels:
        level = max(levels)
        if malformed:
            level = max(level, FALLBACK_LEVEL)
    else:
        level = FALLBACK_LEVEL
        malformed = True

    return InterventionAnnotation(
        fired=level >= 1,
        level=level,
        markers=frozenset(markers),
        well_formed=not malformed,
        raw_marker_lines=tuple(raw_lines),
        partition=partition,
        domain=domain,
    )
