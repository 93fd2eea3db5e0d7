import numpy as np
import pytest

from common.wqed.model import LatticeParams


@pytest.fixture
def small_lattice() -> LatticeParams:
    """3 x 4 array with unequal couplings."""
    return LatticeParams(n_x=3, n_y=4, d=1.0, c=100.0, omega0=100.0, g_x=1.0, g_y=0.7)


@pytest.fixture
def sweep_lattice() -> LatticeParams:
    return LatticeParams(n_x=15, n_y=5, d=1.0, c=100.0, omega0=100.0, g_x=1.0, g_y=1.0)


@pytest.fixture
def ribbon_lattice() -> LatticeParams:
    """100 x 5 array at phi0 = pi/6."""
    return LatticeParams.from_decay_rates(n_x=100, n_y=5, gamma_x=0.01, gamma_y=0.01, phi0=np.pi / 6)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
