"""Substrate-facing prompt assembly and the intervention marker grammar."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .corpus import ANSWER_LETTERS, BASELINE, Item
from .profile import CapabilityProfile, Partition, parse_profile
from .router import RoutingDirective

TEMPLATE_VERSION = "ccs-scaffold/1.0"
PROFILE_PREFIX = "User capability profile: "

UNCERTAINTY_MARKER = "[CCS:UNCERTAINTY]"
BOUNDARY_MARKER = "[CCS:BOUNDARY]"


def format_marker(level: int, partition: Partition, domain: str) -> str:
    if partition is Partition.UNDECLARED:
        partition = Partition.WEAK
    return f"[CCS:INTERVENTION level={level} partition={partition.value} domain={domain}]"


def marker_block(directive: RoutingDirective) -> list[str]:
    """The exact marker lines a compliant response starts with."""
    lines = [format_marker(directive.level_hint, directive.partition, directive.subject)]
    if directive.level_hint >= 2:
        lines.append(UNCERTAINTY_MARKER)
    if directive.level_hint >= 3:
        lines.append(BOUNDARY_MARKER)
    return lines


_LEVEL_GUIDANCE = {
    0: (
        "This prompt sits inside the user's reliable expertise. "
        "Respond directly and minimize intervention markers: emit only the level-0 status "
        "marker below and no other CCS markers."
    ),
    1: (
        "Answer directly, then add one short flag naming the point the user should "
        "double-check before relying on the answer."
    ),
    2: (
        "The user is partially familiar with this domain but may not be able to check the "
        "reasoning. Lay out the reasoning step by step, mark the steps that rely on "
        "expertise outside the user's strong domains, and state your uncertainty."
    ),
    3: (
        "The user reads this domain as a lay evaluator. Include explicit uncertainty "
        "disclosure and capability-boundary signaling: say what you are unsure of, say which "
        "parts the user cannot verify unaided, and recommend review by a qualified expert."
    ),
}

_POLICY = (
    "Intervention policy: strong domains get direct answers with no scaffolding; "
    "mixed domains get scaffolding only when the prompt's content does not match the "
    "user's strong-domain background; weak and undeclared domains always get full "
    "scaffolding."
)


@dataclass(frozen=True)
class PromptEnvelope:
    system_text: str
    user_text: str
    directive: RoutingDirective | None
    template_version: str
    item_id: str
    condition: str

    def messages(self) -> list[dict[str, str]]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]


def render_user_text(item: Item) -> str:
    lines = [f"Question: {item.question}"]
    for letter, choice in zip(ANSWER_LETTERS, item.choices):
        lines.append(f"{letter}. {choice}")
    if item.choices:
        lines.append("")
        lines.append("Finish your response with a line of the form 'Answer: <letter>'.")
    return "\n".join(lines)


def assemble_prompt(
    profile: CapabilityProfile, directive: RoutingDirective, item: Item
) -> PromptEnvelope:
    markers = marker_block(directive)
    marker_lines = "\n".join(markers)
    system = "\n\n".join(
        [
            "You are assisting a professional whose ability to evaluate your reasoning "
            "differs from domain to domain.",
            PROFILE_PREFIX + json.dumps(profile.to_dict(), ensure_ascii=False),
            _POLICY,
            (
                f"Routing directive: domain={directive.subject} "
                f"partition={directive.partition.value} level={directive.level_hint} "
                f"reason={directive.rationale}"
            ),
            _LEVEL_GUIDANCE[directive.level_hint],
            "Start your response with exactly these marker lines, each on its own line, "
            "before any other text:\n" + marker_lines,
        ]
    )
    return PromptEnvelope(
        system_text=system,
        user_text=render_user_text(item),
        directive=directive,
        template_version=TEMPLATE_VERSION,
        item_id=item.id,
        condition=profile.id,
    )


def assemble_baseline(item: Item) -> PromptEnvelope:
    """Unscaffolded control prompt: no profile, no markers requested."""
    return PromptEnvelope(
        system_text="You are a helpful assistant. Answer the user's question.",
        user_text=render_user_text(item),
        directive=None,
        template_version=TEMPLATE_VERSION,
        item_id=item.id,
        condition=BASELINE,
    )


def extract_profile(system_text: str) -> CapabilityProfile:
    """Recover the embedded capability profile from an assembled system prompt."""
    for para in system_text.split("\n\n"):
        if para.startswith(PROFILE_PREFIX):
            return parse_profile(para[len(PROFILE_PREFIX) :])
    raise ValueError("system text carries no capability profile block")
