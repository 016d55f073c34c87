import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    prev = _CRITERIA.get(n, (title, "PASS", ""))
    status, note = prev[1], prev[2]
    if rep.when == "call" or rep.failed:
        if hasattr(rep, "wasxfail"):
            status, note = "FAIL", "expected failure: " + rep.wasxfail
        elif rep.failed:
            status, note = "FAIL", ""
    _CRITERIA[n] = (title, status, note)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status, note = _CRITERIA[n]
        line = "criterion %d: %s  %s" % (n, status, title)
        if note:
            line += "  (%s)" % note
        terminalreporter.write_line(line)
