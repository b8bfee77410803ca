"""Shared reporting for the acceptance suite.

Criterion verdict lines are collected during the run and echoed in the
terminal summary, so each acceptance criterion shows exactly one
PASS/FAIL line even under captured output.
"""

VERDICTS = []


def record_verdict(line):
    VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in VERDICTS:
        terminalreporter.write_line(line)
