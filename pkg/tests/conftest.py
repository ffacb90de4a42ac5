from fractions import Fraction

import numpy as np
import pytest

from robust_auction.mechanism import make_mechanism
from robust_auction.oracle import desk_instance
from robust_auction.valuation import make_distribution


@pytest.fixture(scope="session")
def uniform101():
    return make_distribution({"kind": "uniform", "B": 1, "tick": "0.01"})


@pytest.fixture(scope="session")
def uniform11():
    return make_distribution({"kind": "uniform", "B": 1, "tick": "0.1"})


@pytest.fixture(scope="session")
def desk():
    """Grid {0, .25, .5, .75, 1}, eps = 1/2, rho = 1/3, T = 8."""
    return desk_instance(5, 8, "0.5")


@pytest.fixture
def mep(uniform101):
    return make_mechanism("mep", uniform101, "0.5", Fraction(1, 3), 1000)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
