"""Taylor jets in the ellipticity parameter: truncation and staleness."""

import numpy as np
import pytest

from mireg.jets import (EllipticityWindow, Jet, JetBudgetError, JetError,
                        default_order, jet_ddiff, jet_eval, jet_mul,
                        max_abs_diff)


def test_default_order():
    assert default_order(0.75) == 4
    assert default_order(0.45) == 6


def test_mul_matches_numpy_poly(rng):
    # oracle: numpy polynomial product, truncated
    a = Jet(rng.standard_normal(5), 1.0)
    b = Jet(rng.standard_normal(5), 1.0)
    prod = jet_mul(a, b)
    full = np.polynomial.polynomial.polymul(a.coeffs, b.coeffs)
    assert np.allclose(prod.coeffs, full[:5])


def test_mul_broadcasts(rng):
    a = Jet(rng.standard_normal((3, 2, 5)), 1.0)
    b = Jet(rng.standard_normal(5), 1.0)
    prod = jet_mul(a, b)
    assert prod.shape == (3, 2)
    one = jet_mul(a, Jet.constant(1.0, 1.0, 4))
    assert np.allclose(one.coeffs, a.coeffs)


def test_center_and_order_mismatch(rng):
    a = Jet(rng.standard_normal(5), 1.0)
    with pytest.raises(JetError):
        a + Jet(np.zeros(5), 2.0)
    with pytest.raises(JetError):
        a + Jet(np.zeros(4), 1.0)


def test_ddiff_chain(rng):
    a = Jet(rng.standard_normal(5), 0.5)
    d = jet_ddiff(a)
    assert d.stale == 1
    assert np.allclose(d.coeffs[:4], a.coeffs[1:] * np.arange(1, 5))
    assert d.coeffs[4] == 0.0
    # derivative at the center is slot 1
    assert np.isclose(jet_eval(d, 0.5), a.coeffs[1])


def test_ddiff_budget():
    a = Jet(np.ones(3), 0.0)
    b = jet_ddiff(jet_ddiff(a))
    assert b.valid_slots() == 1
    with pytest.raises(JetBudgetError):
        jet_ddiff(b)


def test_eval_horner():
    # (a0 - 1)^2 + 2(a0 - 1) + 3 at a0 = 1.5
    a = Jet(np.array([3.0, 2.0, 1.0]), 1.0)
    assert np.isclose(jet_eval(a, 1.5), 3.0 + 1.0 + 0.25)


def test_times_a0():
    a = Jet(np.array([1.0, 1.0, 0.0]), 2.0)  # 1 + h
    t = a.times_a0()  # (2 + h)(1 + h) = 2 + 3h + h^2
    assert np.allclose(t.coeffs, [2.0, 3.0, 1.0])


def test_variable_eval():
    v = Jet.variable(1.25, 4)
    for a0 in (0.8, 1.0, 1.3):
        assert np.isclose(jet_eval(v, a0), a0)


def test_max_abs_diff_masks_stale_slots(rng):
    a = Jet(rng.standard_normal(5), 0.0)
    b = a.copy()
    b.coeffs[-1] += 10.0
    b.stale = 1
    assert max_abs_diff(a, b) == 0.0
    b.stale = 0
    assert max_abs_diff(a, b) == 10.0


def test_ellipticity_window():
    w = EllipticityWindow(0.75)
    lo, hi = w.interval
    assert np.isclose(lo, 0.75) and np.isclose(hi, 4.0 / 3.0)
    assert np.isclose(w.midpoint, 0.5 * (0.75 + 4.0 / 3.0))
    l0 = w.level_interval(0)
    l3 = w.level_interval(3)
    # higher levels evaluate on strictly smaller supersets of I
    assert l0[0] < l3[0] < lo and hi < l3[1] < l0[1]
    c = w.centers(1)
    assert len(c) == 5 and np.all(np.diff(c) > 0)
    assert w.contains(1.0) and not w.contains(3.0)
    with pytest.raises(ValueError):
        EllipticityWindow(1.5)
