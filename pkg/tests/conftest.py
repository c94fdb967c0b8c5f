import numpy as np
import pytest

from qdlab.disorder import DisorderEnsembleSpec, sample_potential
from qdlab.evolution import WaveFunction
from qdlab.lattice import MomentumGrid
from qdlab.states import GaussianPacket


@pytest.fixture(scope="session")
def grid8():
    return MomentumGrid(8)


@pytest.fixture(scope="session")
def grid16():
    return MomentumGrid(16)


@pytest.fixture(scope="session")
def grid64():
    return MomentumGrid(64)


@pytest.fixture()
def rng():
    return np.random.default_rng(np.random.Philox(key=42))


@pytest.fixture()
def random_state8(grid8, rng):
    data = rng.standard_normal(grid8.shape) + 1j * rng.standard_normal(grid8.shape)
    return WaveFunction(data, "position", grid8)


@pytest.fixture(scope="session")
def packet8(grid8):
    pk = GaussianPacket(sigma_x=1.0, x0=(3.5, 3.5, 3.5))
    return WaveFunction(pk.position_amplitudes(grid8), "position", grid8)


@pytest.fixture(scope="session")
def realization8(grid8):
    spec = DisorderEnsembleSpec("gaussian", 0.5, 1)
    return sample_potential(spec, grid8, 0)
