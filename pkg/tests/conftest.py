import numpy as np
import pytest

from calogero_susy import ModelParams, build_grid

_CRITERIA = []


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def small_grid():
    return build_grid(7.5, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def report_criterion():
    """Record one acceptance line; shown in the terminal summary."""

    def record(number, passed, detail, label=""):
        _CRITERIA.append((number, label, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, label, passed, detail in sorted(_CRITERIA, key=lambda r: (r[0], r[1])):
        verdict = "PASS" if passed else "FAIL"
        if label:
            terminalreporter.write_line(f"  criterion {number} ({label}): {verdict}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {number}: {verdict}  {detail}")
