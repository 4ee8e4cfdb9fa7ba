import numpy as np
import pytest

from symflow.gas import GasParams, PowerLaw
from symflow.geometry import Geometry, MassGrid


@pytest.fixture
def gas():
    return GasParams(1.4)


@pytest.fixture
def law():
    return PowerLaw(exponent=1.0)


@pytest.fixture
def cyl():
    return Geometry(1, 1.0, 2.0, "cylindrical")


def smooth_state(geom, n, eps=0.05):
    from symflow.presets import InitialPreset, build_preset

    return build_preset(InitialPreset("combined", eps), geom, MassGrid(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
