import numpy as np
import pytest

from polyschro.operators import ModelSpec
from polyschro.potentials import GaussianPotential, plant_zero_eigenvalue, plant_zero_resonance


@pytest.fixture(scope="session")
def weak52():
    """Small regular (5,2) model shared across modules."""
    return ModelSpec(5, 2, GaussianPotential(-0.1, 1.0), beta=20.0, R=30.0, N=256)


@pytest.fixture(scope="session")
def plant52():
    """(5,2) model with an exact zero eigenvalue."""
    return ModelSpec(5, 2, plant_zero_eigenvalue(5, 2), beta=30.0, R=30.0, N=384)


@pytest.fixture(scope="session")
def resonance52():
    """(5,2) model with an exact first-kind zero resonance."""
    return ModelSpec(5, 2, plant_zero_resonance(5, 2, kind=1), beta=30.0, R=30.0, N=384)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
