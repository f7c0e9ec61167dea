import numpy as np
import pytest

from app.core.data.sample import SurvivalSample
from app.core.data.simulation import SimulationLaw, simulate
from app.core.data.truths import ConstantTruth, QuadraticTruth
from app.core.parametric.families import get_family
from app.core.smoothing.kernels import get_kernel


# --- SMALL HAND-CHECKED SAMPLES ---
@pytest.fixture
def d3():
    """Three failures at 1, 2, 3 observed on [0, 3]."""
    return SurvivalSample.from_records([1.0, 2.0, 3.0], [1, 1, 1], horizon=3.0)


@pytest.fixture
def d4():
    """Failures at 1 and 3, censorings at 2 and 4."""
    return SurvivalSample.from_records([1.0, 2.0, 3.0, 4.0], [1, 0, 1, 0], horizon=4.0)


# --- KERNELS / FAMILIES ---
@pytest.fixture
def uniform():
    return get_kernel("uniform")


@pytest.fixture
def epanechnikov():
    return get_kernel("epanechnikov")


@pytest.fixture
def constant_family():
    return get_family("constant")


@pytest.fixture
def gompertz_family():
    return get_family("gompertz")


# --- SIMULATED SAMPLES ---
@pytest.fixture(scope="session")
def constant_law():
    return SimulationLaw(true_hazard=ConstantTruth(1.0), horizon=3.0, seed=11)


@pytest.fixture(scope="session")
def constant_sample(constant_law):
    return simulate(constant_law, 4000, seed=11)


@pytest.fixture(scope="session")
def quadratic_law():
    return SimulationLaw(true_hazard=QuadraticTruth(1.0, 1.0), horizon=2.0, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
