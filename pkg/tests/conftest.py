import numpy as np
import pytest

from rpfcone.dynamics import DoublingMap, IntermittentMap
from rpfcone.potentials import ConstantPotential, GeometricPotential
from rpfcone.transfer import DiscretizedOperator, power_iterate

RES = 4096


@pytest.fixture(scope="session")
def doubling():
    return DoublingMap()


@pytest.fixture(scope="session")
def intermittent():
    return IntermittentMap(0.5)


@pytest.fixture(scope="session")
def doubling_op(doubling):
    return DiscretizedOperator(doubling, ConstantPotential(0.0), RES)


@pytest.fixture(scope="session")
def doubling_data(doubling_op):
    return power_iterate(doubling_op)


@pytest.fixture(scope="session")
def intermittent_pot(intermittent):
    return GeometricPotential(intermittent, 0.1)


@pytest.fixture(scope="session")
def intermittent_op(intermittent, intermittent_pot):
    return DiscretizedOperator(intermittent, intermittent_pot, RES)


@pytest.fixture(scope="session")
def intermittent_data(intermittent_op):
    return power_iterate(intermittent_op)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
