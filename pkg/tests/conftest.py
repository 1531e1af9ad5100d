import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dirichlet_ops.dirichlet_core import DirichletPolynomial, Symbol
from dirichlet_ops.operators import certify
from dirichlet_ops.spaces import AlphaFamily

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture
def mu0():
    return AlphaFamily(0.0)


@pytest.fixture
def identity():
    return certify(Symbol(1, DirichletPolynomial()))


@pytest.fixture
def dilation2():
    return certify(Symbol(2, DirichletPolynomial()))


@pytest.fixture
def compact_symbol():
    """s + 2 - 2^{-s}: Re Phi >= Re s + 1."""
    return certify(Symbol(1, DirichletPolynomial({1: 2.0, 2: -1.0})))


def random_poly(rng, support=20, terms=4):
    idx = rng.choice(np.arange(1, support + 1), size=terms, replace=False)
    return DirichletPolynomial({int(n): complex(rng.normal(), rng.normal()) for n in idx})


# -- acceptance reporting ------------------------------------------------------

_CRITERIA: dict = {}


@pytest.fixture
def record_criterion():
    """Record one acceptance line: record_criterion(number, title, passed, detail)."""

    def record(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
