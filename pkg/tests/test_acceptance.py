"""Acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL/SKIP line (also collected into the terminal summary).
"""

import json
import os
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import pytest
from scipy import stats as sps

import conftest
from ccs.corpus import Item
from ccs.experiment import RunConfig, execute_run
from ccs.profile import Partition
from ccs.replay import synthetic_items
from ccs.report import render_profile_inversion
from ccs.router import Verdict, route
from ccs.runlog import read_log, run_digest
from ccs.stats import ContingencyTable2x2, fisher_exact, permutation_test
from ccs.substrate import mock_config

from oracles import fisher_enumeration
from test_stats import null_calibration_pvalues, reference_pattern_pairs

TESTS = Path(__file__).parent


@contextmanager
def criterion(number, title):
    start = time.perf_counter()
    status, detail = "FAIL", ""
    try:
        yield
        status = "PASS"
    except pytest.skip.Exception as exc:
        status, detail = "SKIP", str(exc)
        raise
    except BaseException as exc:
        detail = f"{type(exc).__name__}: {exc}".splitlines()[0]
        raise
    finally:
        line = f"[{status}] criterion {number}: {title} ({time.perf_counter() - start:.2f}s)"
        if detail:
            line += f" {detail}"
        print(line)
        conftest.ACCEPTANCE_LINES.append(line)


def test_criterion_1_fixture_inversion_table(replay_log):
    with criterion(1, "fixture replay of the profile-inversion table"):
        start = time.perf_counter()
        manifest, records = read_log(replay_log)
        doc = render_profile_inversion(records, manifest)
        elapsed = time.perf_counter() - start
        assert "| PCS-NLP | 3.3% (1/30) | 100% (30/30) | 90.0% (27/30) |" in doc
        assert "| PCS-LitProf | 100% (30/30) | 73.3% (22/30) | 0% (0/30) |" in doc
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


def random_tables(count, seed=2024, cap=60):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        r1, r2 = rng.randint(1, cap), rng.randint(1, cap)
        a, c = rng.randint(0, r1), rng.randint(0, r2)
        if a + c > cap or (r1 - a) + (r2 - c) > cap:
            continue
        out.append((a, r1 - a, c, r2 - c))
    return out


def test_criterion_2_fisher_exact():
    with criterion(2, "Fisher exact p < 1e-13 and oracle agreement on 502 tables"):
        for cells in [(1, 29, 30, 0), (27, 3, 0, 30)]:
            assert fisher_exact(ContingencyTable2x2(*cells)).p_value < 1e-13
        worst = 0.0
        for cells in [(1, 29, 30, 0), (27, 3, 0, 30), *random_tables(500)]:
            ours = fisher_exact(ContingencyTable2x2(*cells)).p_value
            ref = float(fisher_enumeration(*cells))
            worst = max(worst, abs(ours - ref) / ref)
        assert worst <= 1e-12, f"max relative error {worst:.3e}"


def test_criterion_3_permutation():
    with criterion(3, "permutation exceed_count 0, p = 1/10001, null calibration"):
        start = time.perf_counter()
        res = permutation_test(reference_pattern_pairs(), n_permutations=10_000, seed=20240601)
        assert res.exceed_count == 0
        assert res.p_value == pytest.approx(1 / 10001) and res.p_value < 1e-4
        pvals = null_calibration_pvalues(n_datasets=200)
        ks = sps.kstest(pvals, "uniform").pvalue
        assert ks > 0.01, f"KS p={ks:.4f}"
        elapsed = time.perf_counter() - start
        assert elapsed < 60, f"took {elapsed:.1f}s"


def ml_items(n=30):
    return [
        Item(f"machine_learning_{i:04d}", "machine_learning", f"How does the learning rate of model {i} affect the loss?",
             ("a", "b", "c", "d"), i % 4)
        for i in range(n)
    ]


def test_criterion_4_mock_inversion(tmp_path):
    with criterion(4, "end-to-end mock inversion 0% vs 100%, digest-identical rerun"):
        start = time.perf_counter()
        digests = []
        for run in ("a", "b"):
            cfg = RunConfig(corpus_paths=(), items=ml_items(), profiles=("pcs-nlp", "pcs-litprof"),
                            conditions=("PCS-NLP", "PCS-LitProf"), substrates=(mock_config(),),
                            out_dir=tmp_path / run, seed=7)
            result = execute_run(cfg)
            _, records = read_log(result.log_path)
            fired = {c: sum(r.annotation.fired for r in records if r.condition == c) for c in ("PCS-NLP", "PCS-LitProf")}
            assert fired == {"PCS-NLP": 0, "PCS-LitProf": 30}, fired
            assert len(records) == 60
            digests.append(run_digest(result.log_path))
        assert digests[0] == digests[1]
        elapsed = time.perf_counter() - start
        assert elapsed < 5, f"took {elapsed:.2f}s"


def test_criterion_5_mixed_ordering(nlp, tmp_path):
    with criterion(5, "mixed-domain ordering psychology > logic >= econometrics"):
        items = [i for i in synthetic_items() if i.subject in {"professional_psychology", "formal_logic", "econometrics"}]
        # mechanism check on the pure texts
        pure = {s: [i for i in items if i.subject == s] for s in ("professional_psychology", "formal_logic", "econometrics")}
        verdicts = {s: {route(nlp, i.subject, i.prompt_text).alignment.verdict for i in its} for s, its in pure.items()}
        assert Verdict.MISALIGNED in verdicts["professional_psychology"]
        assert nlp.classify("formal_logic") is Partition.MIXED
        cfg = RunConfig(corpus_paths=(), items=items, profiles=("pcs-nlp",), conditions=("PCS-NLP",),
                        substrates=(mock_config(),), out_dir=tmp_path)
        _, records = read_log(execute_run(cfg).log_path)
        rate = {s: sum(r.annotation.level >= 2 for r in records if r.subject == s) / 30 for s in pure}
        assert rate["professional_psychology"] > rate["formal_logic"] >= rate["econometrics"], rate


PROPERTY_NODES = [
    "test_router.py::test_determinism_and_bounds",
    "test_scaffold_annotate.py::test_marker_round_trip",
    "test_scaffold_annotate.py::test_parse_fuzz_random_strings",
    "test_scaffold_annotate.py::test_parse_total_on_text",
    "test_profile.py::test_overlap_is_rejected_with_label",
    "test_profile.py::test_round_trip_and_classify_total",
    "test_stats.py::test_fisher_swap_invariance",
    "test_stats.py::test_wilson_boundaries",
]


def test_criterion_6_property_suites():
    with criterion(6, "property suites"):
        proc = subprocess.run(
            [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *[str(TESTS / n) for n in PROPERTY_NODES]],
            capture_output=True, text=True, cwd=TESTS.parent,
        )
        tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr
        assert proc.returncode == 0, tail
        assert "failed" not in tail and "passed" in tail, tail


def test_criterion_7_live_smoke(tmp_path):
    with criterion(7, "live 5-item smoke run"):
        config_path = os.environ.get("CCS_LIVE_SUBSTRATE")
        if not config_path:
            pytest.skip("set CCS_LIVE_SUBSTRATE to a substrate config JSON and the matching CCS_API_KEY_<VENDOR>")
        from ccs.cli import main
        from ccs.substrate import SubstrateConfig

        vendor = SubstrateConfig.from_dict(json.loads(Path(config_path).read_text())).vendor
        if not os.environ.get(f"CCS_API_KEY_{vendor.upper()}"):
            pytest.skip(f"CCS_API_KEY_{vendor.upper()} not set")
        csv = tmp_path / "machine_learning_test.csv"
        csv.write_text("".join(f'"{i.question}",a,b,c,d,A\n' for i in ml_items(5)))
        code = main(["run", "--profile", "pcs-nlp", "--corpus", str(csv), "--conditions", "pcs-nlp",
                     "--substrate", config_path, "--out", str(tmp_path / "live")])
        assert code == 0
        _, records = read_log(tmp_path / "live" / "run.jsonl")
        assert len(records) == 5 and all(r.completed for r in records)
