import sys
from pathlib import Path

import pytest

# make tests/helpers.py importable regardless of invocation directory
sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture()
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(name: str, ok: bool, detail: str = ""):
        status = "PASS" if ok else "FAIL"
        suffix = f": {detail}" if detail else ""
        _ACCEPTANCE_LINES.append(f"{status} {name}{suffix}")
        assert ok, f"{name}{suffix}"

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
