"""Synthetic corpus and mock fault plans that reproduce a fixed set of reference activation counts.

The mixed-domain subsets are written so that routing alone yields 22/30, 4/30 and
1/30 misaligned items for psychology, logic and econometrics under PCS-NLP. Every
other cell is produced by the routing matrix plus per-item level overrides in the
mock substrate.
"""

from __future__ import annotations

from pathlib import Path

from .corpus import BASELINE, Item
from .experiment import RunConfig, RunResult, execute_run
from .substrate import MockFaultPlan, mock_config

SUBSTRATE_IDS = ("sonnet-4.5", "haiku-4.5", "gpt-4.1", "gpt-5.5")
NLP, LITPROF = "PCS-NLP", "PCS-LitProf"

# (prefix, subject, count)
LAYOUT = (
    ("ml", "machine_learning", 20),
    ("ccs", "college_computer_science", 10),
    ("cli", "clinical_knowledge", 10),
    ("gen", "medical_genetics", 10),
    ("law", "professional_law", 10),
    ("phi", "philosophy", 15),
    ("hist", "european_history", 15),
    ("psy", "professional_psychology", 30),
    ("log", "formal_logic", 30),
    ("eco", "econometrics", 30),
)

_TEXT = {
    "machine_learning": "When training a neural network model, how does the learning rate affect gradient descent on the loss?",
    "college_computer_science": "What is the worst-case complexity of the sorting algorithm when the array is already sorted?",
    "clinical_knowledge": "A patient presents with fever and low blood pressure; which clinical sign indicates sepsis?",
    "medical_genetics": "An autosomal recessive mutation in one gene: what is the chance two heterozygous parents have an affected child?",
    "professional_law": "Does the plaintiff's negligence claim survive if the defendant breached no duty under the statute?",
    "philosophy": "How does Kant ground moral duty differently from utilitarianism?",
    "european_history": "Which treaty ended the war between the Habsburg empire and France in that century?",
}
_ML_AMBIGUOUS = (
    "How many independent parameters does the Bayesian network need if each binary node "
    "may or may not share parameters with its parents?"
)

# Mixed subsets: (misaligned text, aligned text, number misaligned out of 30)
_MIXED = {
    "professional_psychology": (
        "A therapist notices a client's anxiety disorder worsening; which diagnosis and treatment fits?",
        "A psychologist fits a regression model to assessment features; which estimator has lower variance?",
        22,
    ),
    "formal_logic": (
        "Is the syllogism valid when one premise is a negation and the conclusion a conjunction?",
        "Which inference rule lets the model of the proof follow from the given vector of facts?",
        4,
    ),
    "econometrics": (
        "Does the policy change in the minimum wage have a causal effect on unemployment and demand?",
        "What does the OLS regression estimator imply for the variance of the parameter estimates?",
        1,
    ),
}

# (condition, substrate) -> item ids forced silent (level 0) or forced to fire (level 1).
_SILENCED = {
    (NLP, "sonnet-4.5"): ["phi_004", "phi_011", "hist_009"],
    (LITPROF, "sonnet-4.5"): ["cli_002", "cli_005", "cli_008", "gen_003", "gen_007", "law_001", "law_006", "law_010"],
    (NLP, "haiku-4.5"): [
        "cli_004", "gen_009",
        "phi_002", "phi_006", "phi_013", "hist_003", "hist_007", "hist_011", "hist_014",
    ],
    (NLP, "gpt-4.1"): ["hist_005"],
}
_FIRED = {(NLP, "sonnet-4.5"): ["ml_017"]}


def synthetic_items() -> list[Item]:
    items = []
    for prefix, subject, count in LAYOUT:
        for i in range(1, count + 1):
            if subject in _MIXED:
                bad, good, n_bad = _MIXED[subject]
                question = bad if i <= n_bad else good
            elif prefix == "ml" and i == 17:
                question = _ML_AMBIGUOUS
            else:
                question = _TEXT[subject]
            items.append(
                Item(
                    id=f"{prefix}_{i:03d}",
                    subject=subject,
                    question=f"{question} (variant {i})",
                    choices=("Option one", "Option two", "Option three", "Option four"),
                    answer_index=(i - 1) % 4,
                )
            )
    return sorted(items, key=lambda it: it.id)


def fault_plan(substrate_id: str) -> MockFaultPlan:
    overrides: dict[str, int] = {}
    for (cond, sid), ids in _SILENCED.items():
        if sid == substrate_id:
            overrides.update({f"{cond}/{i}": 0 for i in ids})
    for (cond, sid), ids in _FIRED.items():
        if sid == substrate_id:
            overrides.update({f"{cond}/{i}": 1 for i in ids})
    return MockFaultPlan(level_overrides=overrides)


def replay_run_config(out_dir: Path | str, resume: bool = False) -> RunConfig:
    return RunConfig(
        corpus_paths=(),
        items=synthetic_items(),
        profiles=("pcs-nlp", "pcs-litprof"),
        conditions=(BASELINE, NLP, LITPROF),
        substrates=tuple(mock_config(sid, fault_plan(sid)) for sid in SUBSTRATE_IDS),
        out_dir=out_dir,
        seed=0,
        resume=resume,
    )


def build_replay_fixture(out_dir: Path | str) -> RunResult:
    return execute_run(replay_run_config(out_dir))
