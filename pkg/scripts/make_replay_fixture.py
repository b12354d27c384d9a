"""Regenerate tests/fixtures/replay_run.jsonl from the synthetic replay corpus."""

import shutil
import sys
import tempfile
from pathlib import Path

from ccs.replay import build_replay_fixture

DEST = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "replay_run.jsonl"

if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        result = build_replay_fixture(tmp)
        if result.errors:
            sys.exit(f"{len(result.errors)} trial(s) failed")
        shutil.copy(result.log_path, DEST)
    print(f"wrote {result.written} trials to {DEST}")
