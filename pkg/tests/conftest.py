import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sliceorch.model import enumerate_states, default_scenario  # noqa: E402
from sliceorch.solver import greedy_policy, value_iteration  # noqa: E402

CRITERIA: dict = {}


@pytest.fixture(scope="session")
def base():
    return default_scenario()


@pytest.fixture(scope="session")
def base_space(base):
    return enumerate_states(base)


@pytest.fixture(scope="session")
def base_optimal(base, base_space):
    return value_iteration(base_space, base)


@pytest.fixture(scope="session")
def base_greedy(base, base_space):
    return greedy_policy(base_space, base)


class _Criterion:
    def __init__(self):
        self.details = []

    def note(self, text):
        self.details.append(text)


@pytest.fixture
def criterion(request):
    """Collects detail lines; the outcome is taken from the test report."""
    c = _Criterion()
    request.node._criterion = c
    return c


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    c = getattr(item, "_criterion", None)
    if c is not None and rep.when == "call":
        CRITERIA[item.name] = ("PASS" if rep.passed else "FAIL", "; ".join(c.details))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, (status, detail) in CRITERIA.items():
        terminalreporter.write_line(f"{status}  {name}: {detail}")
