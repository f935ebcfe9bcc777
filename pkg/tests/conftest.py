"""Shared fixtures and the acceptance-criteria reporting hook."""

from __future__ import annotations

import numpy as np
import pytest

_CRITERION_LINES = []


def _record(num, ok, detail):
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    _CRITERION_LINES.append((num, line))
    print(line)
    assert ok, line


@pytest.fixture(scope="session")
def criterion():
    """Callable (num, ok, detail): prints one pass/fail line and asserts."""
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for _, line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
