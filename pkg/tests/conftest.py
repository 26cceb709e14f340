import numpy as np
import pytest

from dynbeats.core import GaussianPulse, PhysicalParams, UnitSystem

UNITS = UnitSystem(5.2)


@pytest.fixture
def units():
    return UNITS


@pytest.fixture
def pulse10():
    """10 ns FWHM Gaussian centred 20 ns into the record."""
    return GaussianPulse(fwhm=float(UNITS.time_from_ns(10.0)), t0=float(UNITS.time_from_ns(20.0)))


@pytest.fixture
def fig2_params():
    return PhysicalParams.from_od(11.6, 40)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
