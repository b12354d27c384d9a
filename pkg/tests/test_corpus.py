import json

import pytest

from ccs.corpus import (
    BASELINE,
    ApplicabilityFilter,
    CorpusError,
    InsufficientItemsError,
    Item,
    apply_ambiguity,
    expand_conditions,
    load_ambiguity,
    load_items,
    load_personas,
    sample_per_subject,
    sample_subset,
)


def test_csv_row_mapping(tmp_path):
    path = tmp_path / "machine_learning_test.csv"
    path.write_text('"What is ...",optA,optB,optC,optD,B\n')
    (item,) = load_items(path)
    assert item.subject == "machine_learning"
    assert item.answer_index == 1
    assert item.choices == ("optA", "optB", "optC", "optD")


def test_csv_three_options_reports_line(tmp_path):
    path = tmp_path / "formal_logic_test.csv"
    path.write_text("q1,a,b,c,d,A\nq2,a,b,c,C\n")
    with pytest.raises(CorpusError) as exc:
        load_items(path)
    assert exc.value.line == 2


def test_jsonl_subject_overrides_filename(tmp_path):
    path = tmp_path / "philosophy.jsonl"
    path.write_text(
        json.dumps({"id": "x1", "subject": "European History", "question": "q", "choices": list("abcd"), "answer": "D"})
        + "\n"
        + json.dumps({"id": "x2", "question": "q", "choices": list("abcd"), "answer": 0})
        + "\n"
    )
    items = load_items(path)
    assert [(i.id, i.subject, i.answer_index) for i in items] == [
        ("x1", "european_history", 3),
        ("x2", "philosophy", 0),
    ]


def test_jsonl_bad_line(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"question": "q", "choices": ["a"], "answer": 0}\n')
    with pytest.raises(CorpusError) as exc:
        load_items(path)
    assert exc.value.line == 1


def test_loaders_deterministic(tmp_path):
    path = tmp_path / "econometrics_dev.csv"
    path.write_text("".join(f"q{i},a,b,c,d,A\n" for i in range(20)))
    assert load_items(path) == load_items(path)
    assert load_items(path)[0].subject == "econometrics"


def test_item_invariants():
    with pytest.raises(CorpusError):
        Item("a", "s", "q", ("x", "y", "z"), 0)
    with pytest.raises(CorpusError):
        Item("a", "s", "q", ("w", "x", "y", "z"), 4)


def items(n, subject="machine_learning"):
    return [Item(f"{subject}_{i:04d}", subject, f"q{i}", tuple("abcd"), 0) for i in range(n)]


def test_sample_seed_stable():
    pool = items(100)
    a, b = sample_subset(pool, 30, 7), sample_subset(pool, 30, 7)
    assert a == b and len(a) == 30
    assert [i.id for i in a] == sorted(i.id for i in a)
    assert sample_subset(pool, 30, 8) != a


def test_sample_all_and_insufficient():
    pool = items(10)
    assert sample_subset(list(reversed(pool)), 10, 1) == pool
    with pytest.raises(InsufficientItemsError):
        sample_subset(pool, 11, 0)


def test_thirty_per_subset_across_ten():
    subjects = [f"s{k}" for k in range(10)]
    pool = [it for s in subjects for it in items(50, s)]
    chosen = sample_per_subject(pool, 30, seed=3)
    assert len({i.id for i in chosen}) == 300


def test_expand_conditions_counts(nlp, litprof):
    subjects = sorted(nlp.strong | nlp.mixed | nlp.weak)
    pool = [it for s in subjects for it in items(30, s)]
    conds = [BASELINE, nlp.id, litprof.id]
    assert len(expand_conditions(pool, conds)) == 900
    kept = expand_conditions(pool, conds, ApplicabilityFilter(nlp, (litprof,)))
    assert len(kept) == 480
    assert expand_conditions([], conds, lambda s, c: True) == []
    with pytest.raises(ValueError):
        expand_conditions(pool, [])


def test_ambiguity_sidecar(tmp_path):
    side = tmp_path / "amb.json"
    side.write_text(json.dumps({"machine_learning_0001": True}))
    out = apply_ambiguity(items(3), load_ambiguity(side))
    assert [i.ambiguous for i in out] == [False, True, False]


def test_bundled_personas():
    personas = load_personas()
    assert [p.role for p in personas] == ["management consultant", "corporate lawyer", "NLP/ML researcher"]
    its = personas[0].items()
    assert its and all(not i.ambiguous and i.choices == () for i in its)
    assert its[0].subject == "management_consultant_strong_zone"


def test_persona_missing_zone(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps([{"role": "x", "zones": {"strong_zone": [], "risk_zone": []}}]))
    with pytest.raises(CorpusError, match="outside_zone"):
        load_personas(path)
