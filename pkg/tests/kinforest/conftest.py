import numpy as np
import pytest

from kinforest.data.synthetic import generate_synthetic
from kinforest.environment import Environment, set_current_env
from kinforest.run_config import RunConfig
from kinforest.settings import get_settings


# ===========================================================================================
# ENV AND SETTINGS
# ===========================================================================================

ENV = set_current_env(Environment.TESTING)
SETTINGS = get_settings()


# ===========================================================================================
# FIXTURES
# ===========================================================================================

@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_manifest():
    """Ten families, six-dimensional patches: 10 kin + 10 non-kin pairs per relationship."""
    return generate_synthetic(n_families=10, d_in=6, noise=0.05, seed=3)


@pytest.fixture
def tiny_cfg() -> RunConfig:
    return RunConfig(d_h=4, layers=2, h1=8, h2=4, parts=2, batch=8, epochs=2, lr=1e-3)
