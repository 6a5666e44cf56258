import math

import numpy as np
import pytest

_R2 = 1 / math.sqrt(2)

# Transcribed independently of iqop.circuits so tests check the constants too.
S_LITERAL = _R2 * np.array(
    [[1, 1j, 0, 0], [0, 0, 1j, -1], [-1, 1j, 0, 0], [0, 0, 1j, 1]], dtype=complex
)
P_LITERAL = 0.5 * np.array(
    [[1, 1j, -1, -1j], [1j, -1, 1j, -1], [-1, 1j, -1j, -1], [-1j, -1, -1, 1j]], dtype=complex
)

_CRITERIA = []


@pytest.fixture
def s_literal():
    return S_LITERAL.copy()


@pytest.fixture
def p_literal():
    return P_LITERAL.copy()


@pytest.fixture
def criterion():
    """Record a one-line pass/fail verdict for the acceptance summary."""

    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
