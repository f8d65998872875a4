import numpy as np
import pytest

from fracsemilinear import Ball, StableModel


@pytest.fixture
def m13():
    return StableModel(1.0, 3)


@pytest.fixture
def ball3():
    return Ball.unit(3)


def axis_point(dim, delta, radius=1.0):
    x = np.zeros(dim)
    x[0] = radius - delta
    return x


ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for tag in sorted(ACCEPTANCE, key=lambda t: int(t[1:])):
        terminalreporter.write_line(ACCEPTANCE[tag])
