import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_log(request):
    """Record one PASS/FAIL line per acceptance criterion; the lines are printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        lines[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
