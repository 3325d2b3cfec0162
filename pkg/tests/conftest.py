"""
Shared pytest fixtures for halfspace-kernels tests.

Grids here are small enough for the whole suite to run in seconds; tests
that need the reference grid (R = 64, N = 4096) build it themselves.
"""

import numpy as np
import pytest

from core.grid import make_grid
from core.systems import lame, laplacian


@pytest.fixture
def grid_1d():
    """1D grid, R = 16, N = 512 (h = 1/16)."""
    return make_grid(1, 16.0, 512)


@pytest.fixture
def reference_grid():
    """1D reference grid, R = 64, N = 4096 (h = 1/32)."""
    return make_grid(1, 64.0, 4096)


@pytest.fixture
def grid_2d():
    """2D grid, R = 8, N = 64 (h = 1/4)."""
    return make_grid(2, 8.0, 64)


@pytest.fixture
def laplace2():
    return laplacian(2)


@pytest.fixture
def laplace3():
    return laplacian(3)


@pytest.fixture
def lame211():
    """Lame system in the plane, mu = 1, lambda = 1 (strongly elliptic)."""
    return lame(2, 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
