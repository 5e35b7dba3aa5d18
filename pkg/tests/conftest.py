import numpy as np
import pytest

from tsiv.var_model import BlockLayout, InstrumentalVar1


@pytest.fixture
def scalar_layout():
    return BlockLayout(d_I=1, d_X=1, d_H=1, d_Y=1)


@pytest.fixture
def dense_scalar_model(scalar_layout):
    """Scalar instrumental VAR(1) with every allowed entry nonzero."""
    return InstrumentalVar1.from_blocks(scalar_layout, dict(
        II=0.5, HH=0.5, XI=0.5, XH=0.5, XX=0.3, XY=0.2, YH=0.5, YX=0.4, YY=0.3))


def obs_equiv_matrices(a=0.5, b=0.7, c=0.3):
    A1 = np.array([[a, 0, 0, 0], [c, 0, 0, 0], [c, 0, 0, 0], [0, b, 0, 0]], dtype=float)
    A2 = np.array([[a, 0, 0, 0], [0, a, 0, 0], [0, c, 0, 0], [0, 0, b, 0]], dtype=float)
    return A1, A2


# order [H, I, X, Y, Z, B]
SCM_ROLES = {"H": [0], "I": [1], "X": [2], "Y": 3, "Z": [4], "B": [5]}


def variance_example_scm(which):
    from tsiv.scm_iid import LinearScm
    A = np.zeros((6, 6))
    if which == "I":
        A[1, 5] = 1.185
        A[2, [0, 1, 5]] = [21.095, 6.885, -5.969]
        A[3, [0, 2, 4]] = [-7.244, 16.499, -1.892]
        A[4, [0, 5]] = [1.921, 2.62]
        gamma = [0.2, 1.2, 2.2, 1.2, 2.2, 0.2]
    else:
        A[1, 5] = -2.918
        A[2, [0, 1, 5]] = [-22.439, 3.519, 4.282]
        A[3, [0, 2, 4]] = [19.964, 4.737, 4.011]
        A[4, [0, 5]] = [0.884, -7.97]
        gamma = [3.2, 1.2, 3.2, 2.2, 1.2, 2.2]
    return LinearScm(A, gamma, SCM_ROLES, ("H", "I", "X", "Y", "Z", "B"))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
