import numpy as np
import pytest

from intertwine.construct import Window, build_intertwiner, final_potential
from intertwine.schrodinger import AssociationChain, MatrixHamiltonian, VectorFunction

E1_WINDOW = Window(-5.0, 5.0, 201)


def chain(lam, *members):
    return AssociationChain(lam, [VectorFunction(m if isinstance(m, (list, tuple)) else [m])
                                  for m in members])


@pytest.fixture
def free1():
    return MatrixHamiltonian.free(1)


@pytest.fixture
def e1(free1):
    cs = [chain(-1, "cosh(x)")]
    Q = build_intertwiner(free1, cs, window=E1_WINDOW)
    return free1, cs, Q, final_potential(free1, Q)


@pytest.fixture
def e2(free1):
    cs = [chain(-1, "exp(x)"), chain(-1, "exp(-x)")]
    Q = build_intertwiner(free1, cs, window=E1_WINDOW)
    return free1, cs, Q, final_potential(free1, Q)


@pytest.fixture
def long_chain():
    return chain(
        1,
        ["exp(1i*x)", "0"],
        ["(1i/2)*x*exp(1i*x)", "0"],
        ["(-x^2/8 - 1i*x/8)*exp(1i*x)", "exp(1i*x)"],
        ["(-1i*x^3/48 + x^2/16 + 1i*x/16)*exp(1i*x)", "(1i/2)*x*exp(1i*x)"],
    )


@pytest.fixture
def xs():
    return np.linspace(-5, 5, 201)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
