"""Shared test setup.

Model math must replay bitwise across runs, so torch is pinned to a
single thread before any test imports it.

The acceptance module reports one PASS/FAIL line per numbered criterion;
the hooks below collect those lines (adding a FAIL line when a criterion
test dies before reporting) and print them after the run summary.
"""

from __future__ import annotations

import re

import pytest
import torch

torch.set_num_threads(1)

ACCEPTANCE_REPORT: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_REPORT.append(f"criterion {number:02d}: {status} - {detail}")


_CRITERION_TEST = re.compile(r"test_criterion_(\d+)")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION_TEST.match(item.name)
    if match is None or report.when != "call":
        return
    number = int(match.group(1))
    if any(line.startswith(f"criterion {number:02d}:") for line in ACCEPTANCE_REPORT):
        return
    if report.failed:
        reason = report.longreprtext.strip().splitlines()[-1] if report.longreprtext else "error"
        record_criterion(number, False, reason)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_REPORT:
        return
    terminalreporter.write_sep("-", "acceptance report")
    for line in sorted(ACCEPTANCE_REPORT):
        terminalreporter.write_line(line)
