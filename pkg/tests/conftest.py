import numpy as np
import pytest

from sgchannel.spectral import ChannelGrid, field_from_function


@pytest.fixture(scope="session")
def grid32():
    return ChannelGrid(32, 48)


@pytest.fixture(scope="session")
def grid16():
    return ChannelGrid(16, 32)


def make_field(grid, func):
    return field_from_function(grid, func)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
