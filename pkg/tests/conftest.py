import numpy as np
import pytest

from pilotsched import (LinkParams, MobilityParams, MPH_TO_MPS,
                        default_mcs_table, doppler_frequency)


@pytest.fixture(scope="session")
def reference_params() -> LinkParams:
    """The headline operating point: 15 mph, 2.4 GHz, 1 ms slots, 20 dB SNR."""
    mob = MobilityParams(speed_mps=15 * MPH_TO_MPS, carrier_hz=2.4e9)
    return LinkParams(pilot_power=1.0, data_power=1.0, noise_variance=0.01,
                      channel_variance=1.0, doppler_hz=doppler_frequency(mob),
                      sample_period=1e-3)


@pytest.fixture(scope="session")
def default_table():
    return default_mcs_table()


@pytest.fixture(scope="session")
def flat_params() -> LinkParams:
    """Unit powers and noise, moderate Doppler; handy for worked examples."""
    return LinkParams(pilot_power=1.0, data_power=1.0, noise_variance=1.0,
                      channel_variance=1.0, doppler_hz=50.0, sample_period=1e-3)


@pytest.fixture
def rng():
    # function-scoped: each test draws from a fresh generator, so outcomes do
    # not depend on which other tests ran first
    return np.random.default_rng(1234)
