"""Index combinatorics: exact grading arithmetic and enumeration."""

from fractions import Fraction

import pytest

from mireg.indices import (Homogeneity, IndexSet, MultiIndex,
                           additivity_check, critical_integers,
                           enumerate_populated, homogeneity)

A34 = Fraction(3, 4)
A920 = Fraction(9, 20)


def hv(beta, alpha):
    return homogeneity(beta).value(alpha)


def test_basic_grading():
    z = MultiIndex.zero(1)
    assert z.angle == 1 and z.poly_order == 0
    assert hv(z, A34) == A34
    e1 = MultiIndex.unit_x(1, 0)
    assert e1.angle == 0 and hv(e1, A34) == 1
    p1 = MultiIndex.unit_prime(1, 1)
    assert p1.angle == 2 and hv(p1, A34) == Fraction(3, 2)
    assert hv(e1 + p1, A34) == Fraction(7, 4)


def test_multiindex_validation():
    with pytest.raises(ValueError):
        MultiIndex((-1,), ())
    with pytest.raises(ValueError):
        MultiIndex((0,), ((0, 1),))
    with pytest.raises(ValueError):
        MultiIndex((0,), ((2, 1), (1, 1)))
    # make() normalizes ordering and drops zero counts
    b = MultiIndex.make((0,), {2: 1, 1: 1, 3: 0})
    assert b.beta_prime == ((1, 1), (2, 1))


def test_dormant_and_affine_flags():
    assert MultiIndex.unit_x(1, 0).is_affine
    assert MultiIndex((2,), ()).is_dormant
    assert not MultiIndex((2,), ((1, 1),)).is_dormant


def test_homogeneity_additivity_exhaustive():
    iset = enumerate_populated(A34, 1, Homogeneity(2, 1))
    betas = iset.indices()
    for b1 in betas:
        for b2 in betas:
            additivity_check(b1, b2)


def test_critical_integers():
    n, n_prime, _ = critical_integers(A34)
    assert n == 2 and n_prime == 1
    n, n_prime, _ = critical_integers(A920)
    assert n == 4 and n_prime == 2
    with pytest.raises(ValueError):
        critical_integers(Fraction(1, 2))
    with pytest.raises(ValueError):
        critical_integers(Fraction(2, 3))


def test_enumeration_alpha34():
    iset = enumerate_populated(A34, 1, Homogeneity(2, 0))
    active = iset.active()
    assert [repr(b) for b in active] == [
        "MI([0]|{})", "MI([1]|{})", "MI([0]|{1:1})", "MI([1]|{1:1})"]
    assert sorted(hv(b, A34) for b in active) == [
        A34, 1, Fraction(3, 2), Fraction(7, 4)]
    assert len(iset) == 7


def test_enumeration_goldens():
    # frozen sizes from the enumeration oracle
    assert len(enumerate_populated(A920, 1, Homogeneity(2, 0))) == 12
    assert len(enumerate_populated(A920, 1, Homogeneity(2, 0)).active()) == 11
    wide = enumerate_populated(A34, 1, Homogeneity(2, 1))
    assert len(wide) == 15 and len(wide.active()) == 9


def test_enumeration_empty_below_alpha():
    assert len(enumerate_populated(A34, 1, Homogeneity(0, 1))) == 0


def test_enumeration_monotone_in_cutoff():
    small = set(enumerate_populated(A34, 1, Homogeneity(2, 0)).indices())
    large = set(enumerate_populated(A34, 1, Homogeneity(2, 1)).indices())
    assert small <= large


def test_text_roundtrip():
    iset = enumerate_populated(A34, 1, Homogeneity(2, 1))
    back = IndexSet.from_text(iset.to_text())
    assert back.alpha == iset.alpha and back.d == iset.d
    assert back.indices() == iset.indices()
    assert [back.is_dormant(b) for b in back.indices()] == \
        [iset.is_dormant(b) for b in iset.indices()]


def test_deterministic_order():
    a = enumerate_populated(A34, 1, Homogeneity(2, 1)).to_text()
    b = enumerate_populated(A34, 1, Homogeneity(2, 1)).to_text()
    assert a == b
