import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# Acceptance tests append their "[criterion N] PASS/FAIL — detail" lines here
# (via tests/test_acceptance.py:report) so the measured values survive
# pytest's output capture and appear once at the end of every run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)
