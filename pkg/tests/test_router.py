import pytest
from hypothesis import given, settings, strategies as st

from ccs.profile import CapabilityProfile, Partition, UndeclaredPolicy
from ccs.router import (
    UndeclaredDomainError,
    Verdict,
    assess_alignment,
    level_for,
    route,
    tokenize,
)

ML_Q = "When training a neural network model, how does the learning rate affect gradient descent?"


def test_tokenize():
    assert tokenize("Bayes' rule, P(A|B)!") == ["bayes", "rule", "p", "a", "b"]


def test_logic_prompt_with_ml_notation_is_aligned(nlp):
    rep = assess_alignment(nlp, "Which inference rule lets the model of the proof follow?", Partition.MIXED)
    assert rep.verdict is Verdict.ALIGNED
    assert set(rep.matched_strong_terms) == {"inference", "model"}
    assert rep.matched_offpartition_terms == ("proof",)
    assert rep.score == pytest.approx(2 / 4)


def test_clinical_psychology_prompt_is_misaligned(nlp):
    rep = assess_alignment(nlp, "A therapist sees a client with an anxiety disorder; which diagnosis fits?")
    assert rep.verdict is Verdict.MISALIGNED
    assert rep.score == 0.0


def test_empty_vocabulary_no_evidence():
    p = CapabilityProfile(id="bare", strong=frozenset({"machine_learning"}), mixed=frozenset({"formal_logic"}))
    rep = assess_alignment(p, "any prompt about a model")
    assert rep.verdict is Verdict.NO_EVIDENCE and rep.score == 0


def test_threshold_tie_counts_as_aligned():
    p = CapabilityProfile(
        id="t",
        strong=frozenset({"s"}),
        weak=frozenset({"w"}),
        vocabulary={"s": ("alpha",), "w": ("omega",)},
        alignment_threshold=0.5,
    )
    # 2 strong / (2 + 1 + 1) = 0.5
    assert assess_alignment(p, "alpha alpha omega").verdict is Verdict.ALIGNED


def test_multiword_terms():
    p = CapabilityProfile(id="t", strong=frozenset({"s"}), vocabulary={"s": ("neural network",)})
    rep = assess_alignment(p, "a neural network and a network")
    assert rep.matched_strong_terms == ("neural network",)


def test_route_examples(nlp, litprof):
    d = route(nlp, "machine_learning", ML_Q)
    assert (d.partition, d.level_hint, d.rationale) == (Partition.STRONG, 0, "strong_silent")
    d = route(litprof, "machine_learning", ML_Q)
    assert (d.partition, d.level_hint, d.rationale) == (Partition.WEAK, 3, "weak_full")
    d = route(nlp, "econometrics", "What does the OLS regression estimator imply for the variance?")
    assert (d.partition, d.level_hint, d.rationale) == (Partition.MIXED, 0, "mixed_aligned")


def test_strong_ambiguous_flag(nlp):
    d = route(nlp, "machine_learning", ML_Q, ambiguous=True)
    assert (d.level_hint, d.rationale) == (1, "strong_ambiguous")


def test_mixed_no_evidence_and_misaligned(nlp):
    assert route(nlp, "formal_logic", "Consider the following.").rationale == "mixed_no_evidence"
    assert route(nlp, "formal_logic", "Is the syllogism valid?").level_hint == 2


def test_undeclared_policies(litprof):
    d = route(litprof, "econometrics", "What is an OLS estimator?")
    assert (d.partition, d.level_hint, d.rationale) == (Partition.UNDECLARED, 3, "undeclared_default")
    strict = CapabilityProfile(
        id="strict", strong=litprof.strong, undeclared_policy=UndeclaredPolicy.REJECT
    )
    with pytest.raises(UndeclaredDomainError):
        route(strict, "econometrics", "x")


SUBJECTS = ["machine_learning", "formal_logic", "econometrics", "philosophy", "unknown_domain", "professional_law"]
WORDS = ["model", "proof", "therapy", "court", "regression", "kant", "the", "valid", "gradient", "client", "war"]
prompts = st.lists(st.sampled_from(WORDS), min_size=1, max_size=12).map(" ".join)

BOUNDS = {
    Partition.STRONG: {0, 1},
    Partition.MIXED: {0, 1, 2},
    Partition.WEAK: {3},
    Partition.UNDECLARED: {3},
}


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from(SUBJECTS), prompts, st.booleans(), st.integers(0, 1))
def test_determinism_and_bounds(subject, prompt, ambiguous, which):
    from ccs.profile import builtin_profiles

    profile = builtin_profiles()[which]
    d1 = route(profile, subject, prompt, ambiguous=ambiguous)
    d2 = route(profile, subject, prompt, ambiguous=ambiguous)
    assert d1 == d2 and d1.to_dict() == d2.to_dict()
    assert d1.level_hint in BOUNDS[d1.partition]


def test_repeated_calls_byte_identical(nlp):
    import json

    first = json.dumps(route(nlp, "formal_logic", "model proof").to_dict(), sort_keys=True)
    assert all(
        json.dumps(route(nlp, "formal_logic", "model proof").to_dict(), sort_keys=True) == first for _ in range(1000)
    )


def test_profile_swap_inversion(nlp, litprof):
    for subject in sorted(nlp.strong | litprof.strong):
        a, b = (nlp, litprof) if subject in nlp.strong else (litprof, nlp)
        if subject in b.weak:
            assert route(a, subject, ML_Q).level_hint <= 1
            assert route(b, subject, ML_Q).level_hint == 3


@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))
def test_mixed_monotone_in_score(s1, o1, s2, o2):
    p = CapabilityProfile(
        id="m",
        strong=frozenset({"s"}),
        mixed=frozenset({"m"}),
        vocabulary={"s": ("alpha",), "m": ("omega",)},
    )
    r1 = assess_alignment(p, " ".join(["alpha"] * s1 + ["omega"] * o1 + ["filler"]))
    r2 = assess_alignment(p, " ".join(["alpha"] * s2 + ["omega"] * o2 + ["filler"]))
    if Verdict.NO_EVIDENCE in (r1.verdict, r2.verdict):
        return
    l1 = level_for(Partition.MIXED, r1.verdict)[0]
    l2 = level_for(Partition.MIXED, r2.verdict)[0]
    if r2.score < r1.score:
        assert l2 >= l1
