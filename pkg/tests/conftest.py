"""Shared fixtures"""

import numpy as np
import pytest

from helpers.characteristic import WeightPair
from helpers.grid import ExponentConfig, GridFunction, make_grid


@pytest.fixture
def grid8():
    return make_grid(1, 1, 1.0, 1.0, 8, 8)


@pytest.fixture
def grid4():
    return make_grid(1, 1, 1.0, 1.0, 4, 4)


@pytest.fixture
def cfg8(grid8):
    return ExponentConfig.for_grid(grid8, 0.5, 0.5, 2.0, theta=3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_f(grid8, rng):
    return GridFunction(grid8, rng.uniform(0.1, 1.0, grid8.size))


@pytest.fixture
def unit_pair(grid8):
    one = GridFunction.constant(grid8, 1.0)
    return WeightPair(one, one)


def _random_pair(grid, rng) -> WeightPair:
    return WeightPair(
        GridFunction(grid, rng.uniform(0.5, 2.0, grid.size)),
        GridFunction(grid, rng.uniform(0.5, 2.0, grid.size)),
    )


@pytest.fixture
def random_w8(grid8, rng):
    return _random_pair(grid8, rng)
