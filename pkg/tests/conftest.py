import numpy as np
import pytest

from devfill import SolverConfig, enumerate_fillings, make_case
from devfill.oracle import critical_zero_loop, sample_loop, saddle_loop
from devfill.curve import BoundaryCurve


_CASES = {}
_SOLVED = {}


def get_case(kind):
    if kind not in _CASES:
        _CASES[kind] = make_case(kind)
    return _CASES[kind]


def get_solved(kind, grid=512):
    key = (kind, grid)
    if key not in _SOLVED:
        _SOLVED[key] = enumerate_fillings(get_case(kind).boundary, SolverConfig(grid=grid))
    return _SOLVED[key]


@pytest.fixture(scope="session")
def case():
    return get_case


@pytest.fixture(scope="session")
def solved():
    return get_solved


@pytest.fixture(scope="session")
def saddle_curve():
    return BoundaryCurve(sample_loop(saddle_loop, 400)[1])


@pytest.fixture(scope="session")
def critical_curve():
    return BoundaryCurve(sample_loop(critical_zero_loop, 720)[1])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
