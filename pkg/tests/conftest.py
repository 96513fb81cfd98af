import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# One verdict line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def acceptance():
    """``record(number, title, ok, detail)`` stores the verdict and returns ``ok``."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        verdict = "PASS" if ok else "FAIL"
        line = f"{verdict} criterion {number:2d}: {title}"
        if detail:
            line += f" -- {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
