import numpy as np
import pytest

from hardylab.discretization import RadialDomain, build_basis
from hardylab.weights import make_power_weights


@pytest.fixture(scope="session")
def power_pair():
    return make_power_weights(-2.0, 2.0, 3)


@pytest.fixture(scope="session")
def small_disc():
    """Uniform 20-cell mesh on [1, 5] with radial measure, N = 3."""
    mesh, quad, basis = build_basis(RadialDomain(1.0, 5.0, 3), 20, "uniform")
    return mesh, quad, basis


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
