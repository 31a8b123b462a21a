import numpy as np
import pytest

from app.config import get_settings
from app.lie.core import algebra_dimension, algebra_from_coordinates
from app.lie.exp_log import exp
from app.models.tags import SE3, SO3, GroupFamily, GroupTag

SU4 = GroupTag(GroupFamily.SU, 4)
GL4 = GroupTag(GroupFamily.GL0, 4)
GLC3 = GroupTag(GroupFamily.GLC, 3)
SO4 = GroupTag(GroupFamily.SO, 4)
SE2 = GroupTag(GroupFamily.SE, 2)

ALL_TAGS = [SO3, SE3, SO4, SE2, SU4, GL4, GLC3]
PRINCIPAL_BOUND = np.pi - 0.1


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    for name in ("LIETRACK_TAU_MEM", "LIETRACK_CHECK_FRAMES", "LIETRACK_VALIDATE", "LIETRACK_REPROJECT_EVERY"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_algebra(rng):
    """Random algebra element whose spectrum stays inside the principal-log strip"""
    def make(tag, scale=1.0, frame="S"):
        coords = rng.uniform(-1.0, 1.0, size=algebra_dimension(tag)) * scale
        X = algebra_from_coordinates(tag, coords, frame)
        margin = np.max(np.abs(np.linalg.eigvals(X.matrix).imag))
        if margin >= PRINCIPAL_BOUND:
            X = X * (0.9 * PRINCIPAL_BOUND / margin)
        return X
    return make


@pytest.fixture
def random_element(random_algebra):
    def make(tag, scale=1.0, frames=("S", "S")):
        return exp(random_algebra(tag, scale)).relabel(frames)
    return make
