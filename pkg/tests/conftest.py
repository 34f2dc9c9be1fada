import pytest

from qdchain import ChainParams, LatticeWindow


@pytest.fixture
def setup_g():
    """alpha = (1, 1), q = 1/2, phi = 1/2; kappa defaults to 4.5."""
    return ChainParams(r=2, s=1, q=0.5, alphas=(1.0, 1.0), phi=0.5)


@pytest.fixture
def setup_s():
    """Integer phi: kappa is pinned."""
    return ChainParams(r=2, s=1, q=0.5, alphas=(1.0, 1.0), phi=0.0)


@pytest.fixture
def w40():
    return LatticeWindow(-40, 40)


@pytest.fixture
def w60():
    return LatticeWindow(-60, 60)
