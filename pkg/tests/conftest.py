import sys
from collections import defaultdict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wardropdesign.fixtures import example_one, example_two  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

CRITERIA = {
    1: "Example 1 obedience arithmetic",
    2: "Example 1 grid LP optimum 17/36 (exact vertex oracle)",
    3: "Example 1 synthesis: K=6 rotation structure, exact obedience",
    4: "Example 1 full implementation: unique social cost 17/36",
    5: "Example 2 fixtures: equilibria, obedience, cost 2/3, K=2 structure",
    6: "Example 2 multiplicity: three BWE outcomes of cost 1",
    7: "Property suite: gradients, total cost, alpha-minimizer, uniqueness",
    8: "Rational approximation and epsilon bound contract",
}

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test backs acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes[marker.args[0]].append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} - {title} ({len(results or [])} checks)")


@pytest.fixture
def game1():
    return example_one()


@pytest.fixture
def game2():
    return example_two()


@pytest.fixture
def fixtures_dir():
    return FIXTURES
