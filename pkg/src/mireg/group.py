"""The structure group: exponential-form endomorphisms of the model space.

A group element is parametrized by a series pi0 and a d-vector of series
pi1; its action is the exponential sum over powers of the two derivations,
truncated exactly by homogeneity counting.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .indices import MultiIndex
from .jets import Jet, max_abs_diff
from .series import (Context, FormalSeries, d0, d1, graded_norm, monomial,
                     mul, proj_minus, unit, z_prime, z_x)


@dataclass
class GroupElement:
    pi0: FormalSeries
    pi1: Tuple[FormalSeries, ...]

    def __post_init__(self):
        ctx = self.ctx
        if len(self.pi1) != ctx.d:
            raise ValueError("pi1 must have one component per spatial axis")
        for comp in self.pi1:
            for beta in comp.terms:
                if ctx.hv(beta) <= 1:
                    raise ValueError(
                        "pi1 components must vanish unless the homogeneity "
                        "exceeds 1")

    @property
    def ctx(self) -> Context:
        return self.pi0.ctx

    @staticmethod
    def identity(ctx: Context) -> "GroupElement":
        return GroupElement(FormalSeries(ctx),
                            tuple(FormalSeries(ctx) for _ in range(ctx.d)))


def _poly_exponents(ctx: Context, max_total: int):
    """Spatial derivative multi-exponents a with 0 < |a| <= max_total."""
    ranges = [range(max_total + 1)] * ctx.d
    for a in itertools.product(*ranges):
        if 0 < sum(a) <= max_total:
            yield a


def apply(g: GroupElement, t: FormalSeries) -> FormalSeries:
    """Gamma tau = sum over (k, a) of pi^(k,a) D^(k,a) tau / (k! a!);
    the sum terminates because every pi factor raises homogeneity."""
    ctx = g.ctx
    t._check(g.pi0)
    out = t.copy()
    max_a = max((b.poly_order for b in t.terms), default=0)

    # D1-power images of t, indexed by the exponent a
    d1_images: Dict[tuple, FormalSeries] = {}
    for a in _poly_exponents(ctx, max_a):
        img = t
        for axis in range(ctx.d):
            for _ in range(a[axis]):
                img = d1(img, axis)
        if not img.is_zero:
            d1_images[a] = img

    pi1_pows: Dict[tuple, FormalSeries] = {}
    for a in d1_images:
        pw = unit(ctx)
        for axis in range(ctx.d):
            for _ in range(a[axis]):
                pw = mul(pw, g.pi1[axis])
        pi1_pows[a] = pw

    pi0_pow = unit(ctx)  # pi0^k
    k = 0
    # base images to advect: a = 0 and each spatial exponent
    d0_chains: Dict[tuple, FormalSeries] = {(0,) * ctx.d: t}
    d0_chains.update(d1_images)
    while True:
        if k > 0:
            pi0_pow = mul(pi0_pow, g.pi0)
            if pi0_pow.is_zero:
                break
            d0_chains = {a: d0(img) for a, img in d0_chains.items()}
            d0_chains = {a: img for a, img in d0_chains.items()
                         if not img.is_zero}
            if not d0_chains:
                break
        for a, img in d0_chains.items():
            if sum(a) == 0:
                factor = pi0_pow if k > 0 else None
            else:
                if a not in pi1_pows or pi1_pows[a].is_zero:
                    continue
                factor = mul(pi0_pow, pi1_pows[a]) if k > 0 else pi1_pows[a]
                if factor.is_zero:
                    continue
            if k == 0 and sum(a) == 0:
                continue  # identity term already seeded
            weight = 1.0 / (math.factorial(k) * _a_factorial(a))
            out = out + weight * mul(factor, img)
        k += 1
    return out


def _a_factorial(a: Sequence[int]) -> int:
    p = 1
    for ai in a:
        p *= math.factorial(ai)
    return p


def check_morphism(g: GroupElement, t1: FormalSeries,
                   t2: FormalSeries) -> float:
    """Max coefficient deviation of Gamma(t1 t2) - Gamma(t1) Gamma(t2)
    below the cutoff, over jet slots reliable on both sides."""
    lhs = apply(g, mul(t1, t2))
    rhs = mul(apply(g, t1), apply(g, t2))
    return series_max_diff(lhs, rhs)


def series_max_diff(s1: FormalSeries, s2: FormalSeries) -> float:
    ctx = s1.ctx
    dev = 0.0
    for beta in set(s1.terms) | set(s2.terms):
        dev = max(dev, coeff_max_diff(s1.coeff(beta), s2.coeff(beta)))
    return dev


def coeff_max_diff(c1, c2) -> float:
    if isinstance(c1, Jet) and isinstance(c2, Jet):
        return max_abs_diff(c1, c2)
    return (c1 - c2).max_abs()


def commutator_a0(g: GroupElement,
                  probes: Sequence[FormalSeries] = None) -> float:
    """Deviation of [Gamma, a0] tau from (sum_k pi0^k z_k) Gamma tau on a
    probe basis; exact identity, so this measures rounding."""
    ctx = g.ctx
    if probes is None:
        probes = _default_probes(ctx)
    # sum_{k>=1} pi0^k z_k
    series_sum = FormalSeries(ctx)
    pw = unit(ctx)
    k = 1
    while True:
        pw = mul(pw, g.pi0)
        if pw.is_zero:
            break
        term = mul(pw, z_prime(ctx, k))
        if term.is_zero and ctx.hv(MultiIndex.unit_prime(ctx.d, k)) >= ctx.cutoff_val:
            break
        series_sum = series_sum + term
        k += 1
    dev = 0.0
    for tau in probes:
        lhs = apply(g, times_a0_series(tau)) - times_a0_series(apply(g, tau))
        rhs = mul(series_sum, apply(g, tau))
        dev = max(dev, series_max_diff(lhs, rhs))
    return dev


def times_a0_series(t: FormalSeries) -> FormalSeries:
    out = FormalSeries(t.ctx)
    for beta, coeff in t.terms.items():
        out._set(beta, coeff.times_a0())
    return out


def _default_probes(ctx: Context) -> List[FormalSeries]:
    probes = [unit(ctx), z_x(ctx, 0), z_prime(ctx, 1)]
    if ctx.hv(MultiIndex.unit_prime(ctx.d, 2)) < ctx.cutoff_val:
        probes.append(z_prime(ctx, 2))
    return probes


def gamma_bound_check(g: GroupElement, t: FormalSeries, n0: float,
                      distance: float) -> Dict:
    """Smallest constants C with ||(Gamma - id) tau||_{|b|} <=
    C sum_{|g|<|b|} distance^{|b|-|g|} ||tau||_{|g|} at each level."""
    ctx = g.ctx
    diff = apply(g, t) - t
    lhs = graded_norm(proj_minus(diff), n0)
    rhs_base = graded_norm(proj_minus(t), n0)
    out = {}
    for h, val in lhs.per_homogeneity.items():
        denom = 0.0
        for h2, val2 in rhs_base.per_homogeneity.items():
            if h2 < h:
                denom += distance ** float(h - h2) * val2
        out[h] = val / denom if denom > 0 else (0.0 if val == 0 else np.inf)
    return out


def recover_parameters(image_zx: Sequence[FormalSeries],
                       image_z1: FormalSeries, ctx: Context,
                       sweeps: int = 10) -> Tuple[FormalSeries, List[FormalSeries]]:
    """Read group parameters off generator images: pi1 from the image of
    z_x, pi0 (partially, as far as the cutoff allows) from the image of
    z1 = z1 + 2 pi0 z2 + 3 pi0^2 z3 + ...; the higher powers contaminate
    the z2 extraction and are peeled off by homogeneity-graded sweeps."""
    pi1 = [img - z_x(ctx, i) for i, img in enumerate(image_zx)]
    resid = image_z1 - z_prime(ctx, 1)
    pi0 = _halve_e2(resid, ctx)
    for _ in range(sweeps):
        correction = FormalSeries(ctx)
        pw = pi0
        k = 3
        while True:
            pw = mul(pw, pi0)
            if pw.is_zero:
                break
            term = mul(pw, z_prime(ctx, k))
            if term.is_zero:
                break
            correction = correction + float(k) * term
            k += 1
        pi0 = _halve_e2(resid - correction, ctx)
    return pi0, pi1


def _halve_e2(s: FormalSeries, ctx: Context) -> FormalSeries:
    """Invert multiplication by 2 z2 on keys containing a second-order slot."""
    out = FormalSeries(ctx)
    for beta, coeff in s.terms.items():
        if beta.prime(2) >= 1:
            out._add_to(beta.shift_prime(2, -1), 0.5 * coeff)
    return out
