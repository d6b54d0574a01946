import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from srsmine.statemodel import load_model_file  # noqa: E402

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


@pytest.fixture
def samples():
    return SAMPLES


@pytest.fixture
def two_state():
    return load_model_file(SAMPLES / "two_state.json")


@pytest.fixture
def infeasible():
    return load_model_file(SAMPLES / "infeasible.json")


@pytest.fixture
def atm():
    return load_model_file(SAMPLES / "atm.json")


# -- acceptance summary -------------------------------------------------------------
#
# Tests tagged ``@pytest.mark.criterion(n, "title")`` are grouped; after the
# run one PASS/FAIL line is printed per criterion.

_criteria = {}
_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criteria[item.nodeid] = tuple(mark.args)


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    ok = report.passed or (report.when != "call" and not report.failed)
    _outcomes[report.nodeid] = _outcomes.get(report.nodeid, True) and ok and not report.skipped


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    grouped = {}
    for nodeid, (number, title) in _criteria.items():
        entry = grouped.setdefault(number, [title, True, 0])
        entry[1] = entry[1] and _outcomes.get(nodeid, False)
        entry[2] += 1
    terminalreporter.section("acceptance criteria")
    for number in sorted(grouped):
        title, ok, count = grouped[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title} ({count} checks)")
