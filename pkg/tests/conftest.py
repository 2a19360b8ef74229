import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from decaylab.lee import LeeModel, lee_spectral_function, two_window_model

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.register_profile("thorough", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# fig1: one window channel; fig2: a second channel opening at 0.5
FIG1 = dict(M=2.0, g2=0.36, E0=0.0, Lambda=5.0)


@pytest.fixture(scope="session")
def fig1_model():
    return LeeModel.window(**FIG1)


@pytest.fixture(scope="session")
def fig1_spectral(fig1_model):
    return lee_spectral_function(fig1_model)


@pytest.fixture(scope="session")
def fig2_model():
    return two_window_model()


@pytest.fixture(scope="session")
def fig2_grid():
    return np.linspace(0.0, 25.0, 2501)


@pytest.fixture(scope="session")
def fig2_densities(fig2_model, fig2_grid):
    from decaylab.evolution import partial_decay_densities
    return partial_decay_densities(fig2_model, fig2_grid)


@pytest.fixture(scope="session")
def fig2_oracle(fig2_model, fig2_grid):
    """Exact occupations of the N = 4000 discretized model (about a minute)."""
    from decaylab.oracle import channel_occupations, discretize
    dm = discretize(fig2_model, 4000, (-1.0, 6.0))
    return channel_occupations(dm, fig2_grid)


@pytest.fixture(scope="session")
def fig1_oracle(fig1_model):
    from decaylab.oracle import discretize
    dm = discretize(fig1_model, 4000, (-1.0, 6.0))
    dm.eigensystem()
    return dm


# -- acceptance report: one PASS/FAIL line per criterion -----------------------

_ACCEPTANCE = []


@pytest.fixture
def report():
    def record(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
