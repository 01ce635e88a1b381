"""Shared fixtures plus a pass/fail line printer for the acceptance suite."""

from __future__ import annotations

import pytest

_ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(criterion: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE_RESULTS.append((criterion, passed, detail))


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        line = f"{status} {criterion}"
        if detail:
            line += f" — {detail}"
        terminalreporter.write_line(line)
