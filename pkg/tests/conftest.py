import numpy as np
import pytest

from picard_swarm.propagator import PropagationConfig, propagate
from picard_swarm.scenarios import reference_force_model, reference_period, synthetic_batch

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def force_model():
    return reference_force_model()


@pytest.fixture(scope="session")
def arc_end():
    """End epoch of the 0.87-period reference arc (start epoch 0)."""
    return 0.87 * reference_period()


@pytest.fixture(scope="session")
def batch64():
    return synthetic_batch(64, seed=3)


@pytest.fixture(scope="session")
def warm64(batch64, arc_end, force_model):
    return propagate(batch64, arc_end, PropagationConfig(force_model=force_model))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
