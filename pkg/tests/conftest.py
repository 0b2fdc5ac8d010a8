import numpy as np
import pytest

from loopsoup.graph import fixture
from loopsoup.green import potential_bundle


@pytest.fixture(scope="session")
def g2():
    return fixture("G2")


@pytest.fixture(scope="session")
def t3():
    return fixture("T3")


@pytest.fixture(scope="session")
def p3():
    return fixture("P3")


@pytest.fixture(scope="session")
def b2(g2):
    return potential_bundle(g2)


@pytest.fixture(scope="session")
def b3(t3):
    return potential_bundle(t3)


@pytest.fixture(scope="session")
def bp3(p3):
    return potential_bundle(p3)


def within(samples, target, k=4.0):
    x = np.asarray(samples, dtype=float)
    se = x.std(ddof=1) / np.sqrt(len(x))
    return abs(x.mean() - target) <= k * se
