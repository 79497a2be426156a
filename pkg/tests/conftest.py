import random

import pytest

from grouptest import BinaryCode


@pytest.fixture
def small_code():
    """Columns (1,0), (0,1), (1,1)."""
    return BinaryCode.from_rows([[1, 0, 1], [0, 1, 1]])


@pytest.fixture
def rng():
    return random.Random(20160618)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict, echoed in the terminal summary."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}"
        if detail:
            line += f"  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
