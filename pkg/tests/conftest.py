import pytest

from tilezeta.catalog import bump_potential, return_potential
from tilezeta.metricize import Potential
from tilezeta.subdivision import lattes_rule


@pytest.fixture(scope="session")
def lattes2():
    return lattes_rule(2)


@pytest.fixture(scope="session")
def lattes3():
    return lattes_rule(3)


@pytest.fixture(scope="session")
def one(lattes2):
    return Potential.constant(lattes2, 1)


@pytest.fixture(scope="session")
def bump(lattes2):
    return bump_potential(lattes2)


@pytest.fixture(scope="session")
def ret(lattes2):
    return return_potential(lattes2)
