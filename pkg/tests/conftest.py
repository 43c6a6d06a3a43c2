import numpy as np
import pytest

from helmcloak import fem, meshgen, xform


@pytest.fixture(scope="session")
def unit_disk_coarse():
    return meshgen.make_disk(1.0, 0.1)


@pytest.fixture(scope="session")
def unit_disk_fine():
    return meshgen.make_disk(1.0, 0.05)


@pytest.fixture(scope="session")
def big_disk():
    return meshgen.make_disk(2.0, 0.1)


@pytest.fixture(scope="session")
def free_field():
    return xform.isotropic_field(1.0, 1.0)


@pytest.fixture(scope="session")
def free_system(unit_disk_coarse, free_field):
    return fem.assemble(unit_disk_coarse, free_field)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
