import numpy as np
import pytest

from robustde.tabular import Dataset

# (criterion, passed, detail) lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []

# The joint law of (A, W) shared by the confounder and mediator constructions
# of the no-common-functional counterexample, with Y = A * W.
DISCRETE_LAW_CELLS = [(0, 0)] * 3 + [(1, 0)] + [(0, 1)] + [(1, 1)] * 3


def discrete_table(copies=1):
    a = np.array([c[0] for c in DISCRETE_LAW_CELLS] * copies, float)
    w = np.array([c[1] for c in DISCRETE_LAW_CELLS] * copies, float)
    return Dataset(x=np.zeros((len(a), 0)), a=a, w=w, y=a * w)


@pytest.fixture
def discrete():
    return discrete_table


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda t: int(t[0].split()[0][1:])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {crit}: {detail}")
