"""Shared pytest configuration.

Prints one pass/fail line per acceptance criterion at the end of a run so
the acceptance suite doubles as a checklist.
"""

import re

_acceptance = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    match = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if match:
        _acceptance[int(match.group(1))] = (report.outcome, report.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_acceptance):
        outcome, nodeid = _acceptance[num]
        name = nodeid.split("::")[-1].replace(f"test_criterion_{num:02d}_", "")
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} ({name}): {status}")
