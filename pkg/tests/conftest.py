import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from nldistill.search import pr_fixing_profiles  # noqa: E402

# criterion number -> (passed, summary); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def profiles():
    return pr_fixing_profiles()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {text}")
