import numpy as np
import pytest

from openqid.algebra import structure_table
from openqid.models import builtin_model


@pytest.fixture(scope="session")
def table2():
    return structure_table(2)


@pytest.fixture(scope="session")
def table3():
    return structure_table(3)


@pytest.fixture(scope="session")
def energy():
    return builtin_model("energy_transfer")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
