import numpy as np
import pytest

from gibbs_maxent.gibbs import GibbsModel
from gibbs_maxent.operators import LocalOperator, SiteSystem


def pauli_model(labels, beta, n):
    return GibbsModel([LocalOperator.from_pauli(l) for l in labels], beta, SiteSystem(n))


def random_hermitian(rng, D, scale=1.0):
    A = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    return scale * (A + A.conj().T) / 2


def random_state(rng, D, rank=None):
    rank = rank or D
    A = rng.normal(size=(D, rank)) + 1j * rng.normal(size=(D, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def _report(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
