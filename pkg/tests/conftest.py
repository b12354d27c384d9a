import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ccs.profile import builtin_profiles  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def nlp():
    return builtin_profiles()[0]


@pytest.fixture(scope="session")
def litprof():
    return builtin_profiles()[1]


@pytest.fixture(scope="session")
def replay_log():
    return FIXTURES / "replay_run.jsonl"


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
