import numpy as np
import pytest

from texreward import procedural
from texreward.mesh import build_adjacency


@pytest.fixture(scope="session")
def icosphere3():
    return procedural.make_icosphere(subdivisions=3)


@pytest.fixture(scope="session")
def icosphere3_adj(icosphere3):
    return build_adjacency(icosphere3)


@pytest.fixture(scope="session")
def flat_grid():
    return procedural.make_grid(nx=9, ny=9)


@pytest.fixture(scope="session")
def cylinder():
    return procedural.make_cylinder(n_theta=48, n_z=17, radius=0.5, height=2.0)


@pytest.fixture(scope="session")
def mirrored_sheet():
    return procedural.make_mirrored_sheet()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260808)
