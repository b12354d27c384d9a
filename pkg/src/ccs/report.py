"""Render run logs into the profile-inversion, mixed-divergence and cross-substrate tables."""

from __future__ import annotations

import csv
import io
import json
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Iterable, Sequence

from .corpus import BASELINE
from .profile import Partition
from .runlog import RunManifest, latest_by_key
from .stats import (
    ContingencyTable2x2,
    RateSummary,
    TrialRecord,
    activation_rate,
    fisher_exact,
    match_pairs,
    permutation_test,
    profile_conditions,
)

DOMAIN_GROUPS: dict[str, tuple[str, ...]] = {
    "ML / CS": ("machine_learning", "college_computer_science"),
    "Medical / Legal": ("clinical_knowledge", "medical_genetics", "professional_law"),
    "Humanities": ("philosophy", "european_history"),
}
MIXED_ORDER = ("professional_psychology", "formal_logic", "econometrics")

# Per-table percentage precision (decimal places).
INVERSION_DECIMALS = 1
MIXED_DECIMALS = 0
SUBSTRATE_DECIMALS = 1

PERMUTATION_NOTE = (
    "permutation statistic: mean over matched pairs of the direction-signed intensity "
    "difference (B - A), null by independent per-pair label swaps, add-one p-value"
)


class ReportError(ValueError):
    pass


class MissingConditionError(ReportError):
    def __init__(self, missing: Sequence[str], message: str | None = None):
        self.missing = list(missing)
        super().__init__(message or f"run is missing condition(s): {', '.join(self.missing)}")


def group_of(subject: str) -> str | None:
    for name, subjects in DOMAIN_GROUPS.items():
        if subject in subjects:
            return name
    return None


def format_percent(summary: RateSummary, decimals: int, with_counts: bool = True) -> str:
    """``"73.3% (22/30)"``; exact 0 and 100 always print without decimals."""
    if summary.fired == 0:
        pct = "0"
    elif summary.fired == summary.total:
        pct = "100"
    else:
        quantum = Decimal(1).scaleb(-decimals)
        pct = str((Decimal(repr(summary.rate)) * 100).quantize(quantum, rounding=ROUND_HALF_UP))
    text = f"{pct}%"
    if with_counts:
        text += f" ({summary.fired}/{summary.total})"
    return text


def display_condition(condition: str) -> str:
    return "Baseline" if condition == BASELINE else condition


def display_subject(subject: str) -> str:
    return subject.replace("_", " ").title()


def _completed(records: Iterable[TrialRecord]) -> list[TrialRecord]:
    return [r for r in latest_by_key(records) if r.completed]


def _pick_substrate(records: list[TrialRecord], manifest: RunManifest | None, substrate: str | None) -> str:
    if substrate is not None:
        return substrate
    if manifest is not None and manifest.substrate_ids:
        return manifest.substrate_ids[0]
    if not records:
        raise ReportError("run has no completed trials")
    return records[0].substrate_id


def _document(
    title: str, header: list[str], rows: list[list[str]], manifest: RunManifest | None, fmt: str
) -> str:
    meta = manifest.header_lines() if manifest is not None else ["run_id: (no manifest)"]
    if fmt == "csv":
        buf = io.StringIO()
        for line in [f"table: {title}", *meta]:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt != "md":
        raise ReportError(f"unknown format {fmt!r}")
    out = [f"<!-- {line} -->" for line in meta]
    out.append("")
    out.append(f"**{title}**")
    out.append("")
    out.append("| " + " | ".join(header) + " |")
    out.append("|" + "|".join("---" for _ in header) + "|")
    out.extend("| " + " | ".join(row) + " |" for row in rows)
    return "\n".join(out) + "\n"


def _partition_suffix(records: list[TrialRecord], condition: str, subjects: Sequence[str]) -> str:
    parts = {
        r.directive.partition
        for r in records
        if r.condition == condition and r.subject in subjects and r.directive is not None
    }
    if len(parts) == 1:
        return f" ({next(iter(parts)).value.title()})"
    return ""


def _inversion_conditions(
    records: list[TrialRecord], manifest: RunManifest | None, conditions: Sequence[str] | None
) -> list[str]:
    present = {r.condition for r in records}
    if conditions is None:
        expected = list(manifest.profile_ids) if manifest is not None else profile_conditions(records)
    else:
        expected = list(conditions)
    if not records:
        raise MissingConditionError(expected or ["<profile A>", "<profile B>"], "run contains no completed trials")
    missing = [c for c in expected if c not in present]
    if missing:
        raise MissingConditionError(missing)
    if len(expected) < 2:
        raise MissingConditionError(
            ["<second profile>"], f"profile inversion needs two profile conditions, found {expected}"
        )
    return expected


def inversion_rates(
    records: Iterable[TrialRecord],
    manifest: RunManifest | None = None,
    conditions: Sequence[str] | None = None,
    substrate: str | None = None,
) -> dict[tuple[str, str], RateSummary]:
    recs = _completed(records)
    conds = _inversion_conditions(recs, manifest, conditions)
    sid = _pick_substrate(recs, manifest, substrate)
    recs = [r for r in recs if r.substrate_id == sid]
    return activation_rate(
        recs,
        lambda r: (r.condition, group_of(r.subject)) if r.condition in conds and group_of(r.subject) else None,
        [(c, g) for c in conds for g in DOMAIN_GROUPS],
    )


def render_profile_inversion(
    records: Iterable[TrialRecord],
    manifest: RunManifest | None = None,
    conditions: Sequence[str] | None = None,
    substrate: str | None = None,
    fmt: str = "md",
) -> str:
    recs = _completed(records)
    conds = _inversion_conditions(recs, manifest, conditions)
    rates = inversion_rates(recs, manifest, conds, substrate)
    header = ["Condition"] + [
        g + _partition_suffix(recs, conds[0], subs) for g, subs in DOMAIN_GROUPS.items()
    ]
    rows = []
    for cond in conds:
        row = [display_condition(cond)]
        for g in DOMAIN_GROUPS:
            s = rates.get((cond, g))
            row.append(format_percent(s, INVERSION_DECIMALS) if s else "n/a")
        rows.append(row)
    return _document("Profile inversion across domain partitions", header, rows, manifest, fmt)


def _mixed_subjects(records: list[TrialRecord], subjects: Sequence[str] | None) -> list[str]:
    if subjects is not None:
        return list(subjects)
    found = {
        r.subject for r in records if r.directive is not None and r.directive.partition is Partition.MIXED
    }
    if not found:
        found = {r.subject for r in records if r.subject in MIXED_ORDER}
    return [s for s in MIXED_ORDER if s in found] + sorted(found - set(MIXED_ORDER))


def render_mixed_divergence(
    records: Iterable[TrialRecord],
    manifest: RunManifest | None = None,
    condition: str | None = None,
    substrate: str | None = None,
    subjects: Sequence[str] | None = None,
    fmt: str = "md",
) -> str:
    recs = _completed(records)
    if not recs:
        raise MissingConditionError([condition or "<profile>"], "run contains no completed trials")
    if condition is None:
        profs = list(manifest.profile_ids) if manifest is not None else profile_conditions(recs)
        if not profs:
            raise MissingConditionError(["<profile>"], "run contains no profile condition")
        condition = profs[0]
    if condition not in {r.condition for r in recs}:
        raise MissingConditionError([condition])
    sid = _pick_substrate(recs, manifest, substrate)
    recs = [r for r in recs if r.substrate_id == sid]
    subs = _mixed_subjects(recs, subjects)
    rates = activation_rate(
        recs, lambda r: r.subject if r.condition == condition and r.subject in subs else None, subs
    )
    rows = [[display_subject(s), format_percent(rates[s], MIXED_DECIMALS)] for s in subs if s in rates]
    header = ["Mixed-Domain Subset", f"Intervention Activation ({display_condition(condition)})"]
    return _document("Within-partition activation divergence", header, rows, manifest, fmt)


def cross_substrate_rates(
    records: Iterable[TrialRecord], manifest: RunManifest | None = None, condition: str | None = None
) -> tuple[str, list[str], dict[tuple[str, str], RateSummary]]:
    recs = _completed(records)
    if not recs:
        raise MissingConditionError([condition or "<profile>"], "run contains no completed trials")
    if condition is None:
        profs = list(manifest.profile_ids) if manifest is not None else profile_conditions(recs)
        if not profs:
            raise MissingConditionError(["<profile>"], "run contains no profile condition")
        condition = profs[0]
    if condition not in {r.condition for r in recs}:
        raise MissingConditionError([condition])
    seen = [r.substrate_id for r in recs if r.condition == condition]
    if manifest is not None:
        substrates = [s for s in manifest.substrate_ids if s in seen]
    else:
        substrates = list(dict.fromkeys(seen))
    rates = activation_rate(
        recs,
        lambda r: (group_of(r.subject), r.substrate_id) if r.condition == condition and group_of(r.subject) else None,
    )
    return condition, substrates, rates


def render_cross_substrate(
    records: Iterable[TrialRecord],
    manifest: RunManifest | None = None,
    condition: str | None = None,
    fmt: str = "md",
) -> str:
    recs = _completed(records)
    condition, substrates, rates = cross_substrate_rates(recs, manifest, condition)
    header = ["Domain Partition", *substrates]
    rows = []
    for g, subs in DOMAIN_GROUPS.items():
        cells = [rates.get((g, s)) for s in substrates]
        if not any(cells):
            continue
        label = g + _partition_suffix(recs, condition, subs)
        rows.append([label] + [format_percent(c, SUBSTRATE_DECIMALS, with_counts=False) if c else "n/a" for c in cells])
    return _document(
        f"Cross-substrate activation rates ({display_condition(condition)})", header, rows, manifest, fmt
    )


def emit_heatmap_data(
    records: Iterable[TrialRecord], manifest: RunManifest | None = None, substrate: str | None = None
) -> str:
    """Long-format CSV (condition, domain_group, substrate, rate, fired, total) for plotting."""
    recs = _completed(records)
    if substrate is not None:
        recs = [r for r in recs if r.substrate_id == substrate]
    rates = activation_rate(
        recs,
        lambda r: (r.condition, group_of(r.subject) or r.subject, r.substrate_id),
    )
    conds = list(manifest.conditions) if manifest is not None else []
    order = {c: i for i, c in enumerate(conds)}
    keys = sorted(rates, key=lambda k: (order.get(k[0], len(order)), k[0], k[2], k[1]))
    rows = [
        [display_condition(c), g, s, f"{rates[(c, g, s)].rate:.6f}", str(rates[(c, g, s)].fired), str(rates[(c, g, s)].total)]
        for c, g, s in keys
    ]
    return _document(
        "Activation heatmap data", ["condition", "domain_group", "substrate", "rate", "fired", "total"], rows, manifest, "csv"
    )


def compute_statistics(
    records: Iterable[TrialRecord],
    manifest: RunManifest | None = None,
    n_permutations: int = 10_000,
    seed: int = 0,
    substrate: str | None = None,
) -> dict[str, Any]:
    """Structured statistics report: rates with Wilson intervals, Fisher tests, permutation tests."""
    recs = _completed(records)
    if not recs:
        raise ReportError("run contains no completed trials")
    sid = _pick_substrate(recs, manifest, substrate)
    out: dict[str, Any] = {
        "manifest": manifest.to_dict() if manifest is not None else None,
        "substrate": sid,
        "notes": [PERMUTATION_NOTE, *(manifest.notes if manifest else ())],
        "review_flags": sorted(
            {f"{r.condition}/{r.item_id}/{r.substrate_id}" for r in recs if not r.annotation.well_formed}
        ),
    }
    by_subject = activation_rate(recs, lambda r: (r.condition, r.substrate_id, r.subject))
    by_group = activation_rate(
        recs, lambda r: (r.condition, r.substrate_id, group_of(r.subject)) if group_of(r.subject) else None
    )
    out["rates_by_subject"] = [
        {"condition": c, "substrate": s, "subject": subj, **v.to_dict()} for (c, s, subj), v in by_subject.items()
    ]
    out["rates_by_group"] = [
        {"condition": c, "substrate": s, "group": g, **v.to_dict()} for (c, s, g), v in by_group.items()
    ]

    profs = list(manifest.profile_ids) if manifest is not None else profile_conditions(recs)
    present = {r.condition for r in recs}
    profs = [p for p in profs if p in present]
    out["fisher"] = []
    out["permutation"] = []
    if len(profs) >= 2:
        a, b = profs[0], profs[1]
        for g in DOMAIN_GROUPS:
            ra, rb = by_group.get((a, sid, g)), by_group.get((b, sid, g))
            if ra is None or rb is None:
                continue
            res = fisher_exact(ContingencyTable2x2.from_rates(ra, rb))
            out["fisher"].append(
                {
                    "group": g,
                    "conditions": [a, b],
                    "table": [[ra.fired, ra.total - ra.fired], [rb.fired, rb.total - rb.fired]],
                    "p_value": res.p_value,
                    "p_exact": f"{res.p_exact.numerator}/{res.p_exact.denominator}",
                    "degenerate": res.degenerate,
                }
            )
        pairs = match_pairs(recs, a, b, sid)
        if pairs:
            for measure in ("level", "fired"):
                res = permutation_test(pairs, n_permutations, seed, measure)
                out["permutation"].append({"conditions": [a, b], **res.to_dict()})
    return out


def render_statistics_json(stats: dict[str, Any]) -> str:
    return json.dumps(stats, indent=2, sort_keys=True) + "\n"
