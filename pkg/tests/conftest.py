import numpy as np
import pytest

from volterra_poisson import DEFAULT_SEED, random_state

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(DEFAULT_SEED)


@pytest.fixture
def states(rng):
    """Factory for a list of random positive lattice states of dimension m."""
    def make(m, n):
        return [random_state(m, rng) for _ in range(n)]
    return make


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
