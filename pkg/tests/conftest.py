import functools

import numpy as np
import pytest

from epps_pulley.cumulants import cumulants_from_traces
from epps_pulley.quadrature import gauss_hermite_rule
from epps_pulley.spectrum import find_spectrum, nystrom_spectrum

BETAS = (0.25, 0.5, 1.0, 2.0, 3.0)
MAIN_BETAS = (0.5, 1.0, 2.0, 3.0)


@functools.lru_cache(maxsize=None)
def spectrum(beta, count=20, J=150):
    return find_spectrum(beta, count, J=J)


@functools.lru_cache(maxsize=None)
def nystrom(beta, count=10):
    return nystrom_spectrum(beta, gauss_hermite_rule(300, beta), count=count)


@functools.lru_cache(maxsize=None)
def traced(beta):
    return cumulants_from_traces(beta, gauss_hermite_rule(300, beta))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion check, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
