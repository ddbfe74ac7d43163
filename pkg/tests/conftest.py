import numpy as np
import pytest

from fractions import Fraction

from mireg.indices import Homogeneity, enumerate_populated
from mireg.jets import EllipticityWindow, default_order
from mireg.series import Context


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_context(alpha=Fraction(3, 4), d=1, cutoff=Homogeneity(2, 0),
                 lam=0.75, order=None):
    alpha = Fraction(alpha)
    iset = enumerate_populated(alpha, d, cutoff)
    if order is None:
        order = default_order(alpha)
    return Context(alpha, d, cutoff, EllipticityWindow(lam), order, iset)


@pytest.fixture
def ctx():
    return make_context()


@pytest.fixture
def ctx_wide():
    # cutoff 2 + alpha: everything the solver needs
    return make_context(cutoff=Homogeneity(2, 1))
