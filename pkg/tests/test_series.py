"""Truncated formal power series over the index set."""

from fractions import Fraction

import numpy as np
import pytest

from mireg.indices import Homogeneity, MultiIndex
from mireg.series import (FormalSeries, d0, d1, graded_norm, monomial, mul,
                          proj_P, proj_minus, unit, z_prime, z_x)

from conftest import make_context


def rand_series(ctx, rng, scale=1.0):
    out = FormalSeries(ctx)
    for beta in ctx.index_set.indices():
        out._set(beta, ctx.jet(scale * rng.standard_normal()))
    return out


def diff(s1, s2):
    from mireg.group import series_max_diff
    return series_max_diff(s1, s2)


def test_unit_is_neutral(ctx_wide, rng):
    t = rand_series(ctx_wide, rng)
    assert diff(mul(unit(ctx_wide), t), t) < 1e-14
    assert diff(mul(t, unit(ctx_wide)), t) < 1e-14


def test_mul_commutative_associative(ctx_wide, rng):
    a = rand_series(ctx_wide, rng)
    b = rand_series(ctx_wide, rng)
    c = rand_series(ctx_wide, rng)
    assert diff(mul(a, b), mul(b, a)) < 1e-12
    assert diff(mul(mul(a, b), c), mul(a, mul(b, c))) < 1e-12


def test_mul_truncation_against_extended_cutoff(rng):
    # products computed under a wider cutoff then projected agree
    lo = make_context(cutoff=Homogeneity(2, 0))
    hi = make_context(cutoff=Homogeneity(2, 1))
    a_lo = rand_series(lo, rng)
    rng2 = np.random.default_rng(12345)
    a_hi = rand_series(hi, rng2)  # larger key set, same draws not needed
    for beta in lo.index_set.indices():
        a_hi._set(beta, a_lo.coeff(beta).copy())
    for beta in hi.index_set.indices():
        if beta not in lo.index_set:
            a_hi._set(beta, hi.jet(0.0))
    p_lo = mul(a_lo, a_lo)
    p_hi = mul(a_hi, a_hi)
    for beta in lo.index_set.indices():
        lo_c = p_lo.coeff(beta)
        hi_c = p_hi.coeff(beta)
        if lo_c is None and hi_c is None:
            continue
        assert np.allclose(lo_c.coeffs, hi_c.coeffs)


def test_z1_squared_key(ctx_wide):
    p = mul(z_prime(ctx_wide, 1), z_prime(ctx_wide, 1))
    key = MultiIndex.make((0,), {1: 2})
    assert set(p.terms) == {key}
    assert np.isclose(p.coeff(key).coeffs[0], 1.0)


def test_d0_leibniz(ctx_wide, rng):
    a = rand_series(ctx_wide, rng)
    b = rand_series(ctx_wide, rng)
    lhs = d0(mul(a, b))
    rhs = mul(d0(a), b) + mul(a, d0(b))
    assert diff(lhs, rhs) < 1e-12


def test_d1_leibniz(ctx_wide, rng):
    a = rand_series(ctx_wide, rng)
    b = rand_series(ctx_wide, rng)
    lhs = d1(mul(a, b))
    rhs = mul(d1(a), b) + mul(a, d1(b))
    assert diff(lhs, rhs) < 1e-12


def test_d0_generator_values(ctx_wide):
    # D0 z_k = (k+1) z_{k+1}, D0 of a constant jet in a0 picks up z_1 ddiff
    ctx = ctx_wide
    img = d0(z_prime(ctx, 1))
    key = MultiIndex.unit_prime(1, 2)
    assert np.isclose(img.coeff(key).coeffs[0], 2.0)
    # the a0-variable at the zero index: D0 a0 = z_1
    var = monomial(ctx, MultiIndex.zero(1),
                   __import__("mireg.jets", fromlist=["Jet"]).Jet.variable(
                       ctx.center, ctx.jet_order))
    img = d0(var)
    z1key = MultiIndex.unit_prime(1, 1)
    assert np.isclose(img.coeff(z1key).coeffs[0], 1.0)
    assert img.coeff(z1key).stale == 1


def test_d0_d1_commute(ctx_wide, rng):
    t = rand_series(ctx_wide, rng)
    assert diff(d0(d1(t)), d1(d0(t))) < 1e-12


def test_projections_complementary(ctx_wide, rng):
    t = rand_series(ctx_wide, rng)
    assert diff(proj_P(t) + proj_minus(t), t) < 1e-14
    assert proj_P(z_x(ctx_wide)).terms and not proj_minus(z_x(ctx_wide)).terms


def test_graded_norm_weights(ctx_wide):
    ctx = ctx_wide
    t = monomial(ctx, MultiIndex.zero(1))  # angle 1
    n = graded_norm(t, 0.5)
    assert np.isclose(n.get(ctx.hv(MultiIndex.zero(1))), 2.0)
    with pytest.raises(ValueError):
        graded_norm(t, 0.0)
