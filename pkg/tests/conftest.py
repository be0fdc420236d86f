import numpy as np
import pytest

from tsallis_lab.grid import ScalarField, TorusGrid
from tsallis_lab.heatflow import normalized_exp, random_torus_density


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def grid1():
    return TorusGrid(1, 256)


@pytest.fixture
def grid2():
    return TorusGrid(2, 64)


@pytest.fixture
def exp_cos(grid1):
    """exp(cos x) / (2 pi I0(1))."""
    (x,) = grid1.mesh()
    return normalized_exp(grid1, np.cos(x))


@pytest.fixture
def torus2(rng, grid2):
    return random_torus_density(grid2, rng, bandwidth=3, amplitude=0.5)


def constant_field(grid):
    return ScalarField(grid, np.full(grid.shape, 1.0 / grid.volume))
