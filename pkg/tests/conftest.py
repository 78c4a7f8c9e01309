import numpy as np
import pytest

_criteria = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def record(label: str, passed: bool, detail: str = ""):
        line = f"[{'PASS' if passed else 'FAIL'}] {label}" + (f" -- {detail}" if detail else "")
        _criteria.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in _criteria:
            terminalreporter.write_line(line)
