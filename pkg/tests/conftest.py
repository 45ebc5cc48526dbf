import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from codedpath.topology import builtin_topology  # noqa: E402


@pytest.fixture(scope="session")
def cost239():
    return builtin_topology("cost239")


@pytest.fixture(scope="session")
def nsfnet():
    return builtin_topology("nsfnet")


_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``criterion(n, detail)`` before asserting; the verdict is taken from
    the test outcome and printed in the terminal summary.
    """
    store = request.config.stash.setdefault(_LINES, [])
    entry = {}

    def note(number, detail):
        entry.update(number=number, detail=detail)

    yield note
    if entry:
        rep = getattr(request.node, "rep_call", None)
        ok = rep is not None and rep.passed
        store.append((entry["number"], "PASS" if ok else "FAIL", entry["detail"]))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {number}: {verdict}  {detail}")
