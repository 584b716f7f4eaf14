from __future__ import annotations

import re
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]

_criteria: dict[str, tuple[str, str]] = {}


@pytest.fixture
def root() -> Path:
    return ROOT


def pytest_runtest_logreport(report):
    match = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not match:
        return
    key = match.group(1)
    title = match.group(2).replace("_", " ")
    if report.failed:
        _criteria[key] = ("FAIL", title)
    elif report.when == "call" and key not in _criteria:
        _criteria[key] = ("PASS", title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=int):
        status, title = _criteria[key]
        terminalreporter.write_line(f"criterion {key}: {status}  {title}")
