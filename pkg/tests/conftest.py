"""Session-wide fixtures: simulated paths and fits reused across modules."""
import numpy as np
import pytest

from qlpp import estimation, models, simulation

from helpers import hawkes_1d, hawkes_2d


@pytest.fixture(scope="session")
def stream_1d_t2000():
    p = hawkes_1d()
    m = models.HawkesModel(1)
    return simulation.simulate_thinning(
        m, m.pack(p), simulation.SimConfig(horizon=2000.0, seed=7)
    )


@pytest.fixture(scope="session")
def stream_2d_t300():
    p = hawkes_2d()
    m = models.HawkesModel(2)
    return simulation.simulate_thinning(
        m, m.pack(p), simulation.SimConfig(horizon=300.0, seed=11)
    )


@pytest.fixture(scope="session")
def fit_1d_t2000(stream_1d_t2000):
    m = models.HawkesModel(1)
    return estimation.qmle(stream_1d_t2000, m, options={"seed": 0})
