import numpy as np
import pytest

from higgsflow.bundle import preset
from higgsflow.geometry import build_torus


@pytest.fixture(scope="session")
def g32():
    return build_torus(1j, 1.0, 32)


@pytest.fixture(scope="session")
def g64():
    return build_torus(1j, 1.0, 64)


@pytest.fixture(scope="session")
def nilpotent(g32):
    return preset(g32, "nilpotent")


@pytest.fixture(scope="session")
def line1(g32):
    return preset(g32, "line", d=1)


@pytest.fixture(scope="session")
def line0(g32):
    return preset(g32, "line", d=0)


@pytest.fixture(scope="session")
def dsum11(g32):
    return preset(g32, "dsum", d1=1, d2=-1)


@pytest.fixture(scope="session")
def extension01(g32):
    return preset(g32, "extension", d1=0, d2=1, eps=1.0)


@pytest.fixture(scope="session")
def atiyah(g32):
    return preset(g32, "extension", d1=0, d2=0, eps=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
