"""
Shared fixtures for the test suite
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from src.forward import SolverParams, assemble, default_boundary
from src.medium_geom import DirectionGrid, ElasticMedium, MeasurementLine, flat_surface, surface_registry


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: acceptance-size runs (deselect with -m "not slow")')


@pytest.fixture(scope='session')
def medium():
    """lambda = mu = 1, omega = 20 (ks = 20)"""
    return ElasticMedium(1.0, 1.0, 20.0)


@pytest.fixture(scope='session')
def low_medium():
    """lambda = mu = 1, omega = 5: cheap solver runs"""
    return ElasticMedium(1.0, 1.0, 5.0)


@pytest.fixture(scope='session')
def small_line():
    return MeasurementLine(1.0, 2.0, 20)


@pytest.fixture(scope='session')
def small_grid():
    return DirectionGrid(16)


@pytest.fixture(scope='session')
def flat_system(low_medium):
    surface = flat_surface(0.0)
    boundary = default_boundary(surface, low_medium, 2.0, SolverParams(nodes_per_wavelength=12))
    return assemble(surface, low_medium, boundary=boundary)


@pytest.fixture(scope='session')
def f2_system(low_medium):
    surface = surface_registry('f2')
    boundary = default_boundary(surface, low_medium, 2.0, SolverParams(nodes_per_wavelength=12))
    return assemble(surface, low_medium, boundary=boundary)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
