import numpy as np
import pytest

from innkf.sim import GaitConfig, SensorNoiseSpec, TerrainProfile, generate_truth, synthesize_sensors


@pytest.fixture(scope="session")
def flat_truth():
    return generate_truth(TerrainProfile("flat"), GaitConfig(), 10.0, seed=1)


@pytest.fixture(scope="session")
def flat_zero_noise(flat_truth):
    sensors, truth = synthesize_sensors(flat_truth, SensorNoiseSpec.zero())
    return flat_truth, sensors, truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
