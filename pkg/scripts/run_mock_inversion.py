"""Run the synthetic replay corpus through the mock substrates and render every table.

    python3 scripts/run_mock_inversion.py --out runs/replay
"""

import argparse
import shutil
from pathlib import Path

from ccs.cli import main as ccs_main
from ccs.replay import build_replay_fixture


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/replay")
    ap.add_argument("--permutations", type=int, default=10_000)
    ap.add_argument("--fresh", action="store_true", help="delete an existing output directory first")
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    out = Path(args.out)
    if args.fresh and out.exists():
        shutil.rmtree(out)
    result = build_replay_fixture(out)
    print(f"run {result.manifest.run_id}: {result.written} trials -> {result.log_path}")
    log = str(result.log_path)
    ccs_main(["report", log, "--substrate", "sonnet-4.5", "--out", str(out)])
    ccs_main(["stats", log, "--substrate", "sonnet-4.5", "--permutations", str(args.permutations), "--out", str(out)])
    print((out / "table2_profile_inversion.md").read_text())
