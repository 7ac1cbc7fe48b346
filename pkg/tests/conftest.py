import numpy as np
import pytest

from rwre.env import LatticeBox, constant_environment, make_law, sample_environment


@pytest.fixture(scope="session")
def srw1():
    return make_law("srw", d=1)


@pytest.fixture(scope="session")
def srw2():
    return make_law("srw", d=2)


@pytest.fixture(scope="session")
def axis2():
    return make_law("axis-choice", d=2)


@pytest.fixture(scope="session")
def srw2_env(srw2):
    return sample_environment(srw2, LatticeBox.centered(40, 2), 0)


@pytest.fixture(scope="session")
def axis2_env(axis2):
    return sample_environment(axis2, LatticeBox.centered(40, 2), 0)


@pytest.fixture(scope="session")
def horizontal_env():
    """Degenerate test fixture: every site moves east/west only."""
    return constant_environment((0.5, 0.0), LatticeBox.centered(40, 2), name="all-horizontal")
