"""The graded model space: truncated formal power series over jets.

A series maps multi-indices to coefficients; every operation truncates at
the homogeneity cutoff immediately, so sizes stay bounded.  Coefficients
are usually scalar jets, but anything supporting the same arithmetic
protocol (grid fields included) works.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional

import numpy as np

from .indices import Homogeneity, IndexSet, MultiIndex, homogeneity
from .jets import EllipticityWindow, Jet, default_order


@dataclass
class Context:
    """Shared configuration every series operation closes over."""

    alpha: Fraction
    d: int
    cutoff: Homogeneity
    window: EllipticityWindow
    jet_order: Optional[int] = None
    index_set: Optional[IndexSet] = None

    def __post_init__(self):
        self.alpha = Fraction(self.alpha)
        if self.jet_order is None:
            self.jet_order = default_order(self.alpha)
        self.cutoff_val = self.cutoff.value(self.alpha)

    @property
    def center(self) -> float:
        return self.window.midpoint

    def hv(self, beta: MultiIndex) -> Fraction:
        return homogeneity(beta).value(self.alpha)

    def below_cutoff(self, beta: MultiIndex) -> bool:
        return self.hv(beta) < self.cutoff_val

    def compatible(self, other: "Context") -> bool:
        return (self.alpha == other.alpha and self.d == other.d
                and self.cutoff == other.cutoff
                and self.jet_order == other.jet_order)

    def jet(self, value) -> Jet:
        return Jet.constant(value, self.center, self.jet_order)


class ContextMismatch(ValueError):
    pass


class FormalSeries:
    """Sparse series beta -> coefficient, truncated below the cutoff."""

    def __init__(self, ctx: Context, terms: Dict[MultiIndex, object] = None):
        self.ctx = ctx
        self.terms = {}
        if terms:
            for beta, coeff in terms.items():
                self._set(beta, coeff)

    def _set(self, beta: MultiIndex, coeff):
        if beta.d != self.ctx.d:
            raise ValueError("dimension mismatch")
        if not self.ctx.below_cutoff(beta):
            return
        if _is_zero_coeff(coeff):
            self.terms.pop(beta, None)
        else:
            self.terms[beta] = coeff

    def _add_to(self, beta: MultiIndex, coeff):
        if not self.ctx.below_cutoff(beta):
            return
        if beta in self.terms:
            coeff = self.terms[beta] + coeff
        self._set(beta, coeff)

    def get(self, beta: MultiIndex):
        return self.terms.get(beta)

    def coeff(self, beta: MultiIndex):
        c = self.terms.get(beta)
        if c is None:
            return self.ctx.jet(0.0)
        return c

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def keys(self):
        return sorted(self.terms, key=lambda b: (self.ctx.hv(b), b.sort_key()))

    def copy(self) -> "FormalSeries":
        return FormalSeries(self.ctx, dict(self.terms))

    def _check(self, other: "FormalSeries"):
        if not self.ctx.compatible(other.ctx):
            raise ContextMismatch("series built in different contexts")

    def __add__(self, other: "FormalSeries") -> "FormalSeries":
        self._check(other)
        out = self.copy()
        for beta, coeff in other.terms.items():
            out._add_to(beta, coeff)
        return out

    def __sub__(self, other: "FormalSeries") -> "FormalSeries":
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "FormalSeries":
        out = FormalSeries(self.ctx)
        for beta, coeff in self.terms.items():
            out._set(beta, scalar * coeff)
        return out

    def scale_coeffs(self, factor) -> "FormalSeries":
        return self.__rmul__(factor)


def unit(ctx: Context) -> FormalSeries:
    """The multiplicative unit: coefficient 1 at the zero index."""
    return FormalSeries(ctx, {MultiIndex.zero(ctx.d): ctx.jet(1.0)})


def monomial(ctx: Context, beta: MultiIndex, coeff=None) -> FormalSeries:
    if coeff is None:
        coeff = ctx.jet(1.0)
    return FormalSeries(ctx, {beta: coeff})


def z_prime(ctx: Context, k: int) -> FormalSeries:
    return monomial(ctx, MultiIndex.unit_prime(ctx.d, k))


def z_x(ctx: Context, axis: int = 0) -> FormalSeries:
    return monomial(ctx, MultiIndex.unit_x(ctx.d, axis))


def mul(t1: FormalSeries, t2: FormalSeries) -> FormalSeries:
    """(t1 t2)_beta = sum over splittings, keys above cutoff dropped."""
    t1._check(t2)
    ctx = t1.ctx
    out = FormalSeries(ctx)
    for b1, c1 in t1.terms.items():
        h1 = ctx.hv(b1)
        for b2, c2 in t2.terms.items():
            # product homogeneity: |b1| + |b2| - alpha
            if h1 + ctx.hv(b2) - ctx.alpha >= ctx.cutoff_val:
                continue
            out._add_to(b1 + b2, c1 * c2)
    return out


FormalSeries.__mul__ = lambda self, other: (
    mul(self, other) if isinstance(other, FormalSeries) else NotImplemented)


def d0(t: FormalSeries) -> FormalSeries:
    """The advection derivation: z1 * d/da0 plus the slot promotion sum."""
    ctx = t.ctx
    out = FormalSeries(ctx)
    for beta, coeff in t.terms.items():
        b1 = beta.shift_prime(1, 1)
        if ctx.below_cutoff(b1):
            out._add_to(b1, coeff.ddiff())
        for k, c in beta.beta_prime:
            # promote one k-slot to a (k+1)-slot with weight (k+1)*c'
            target = beta.shift_prime(k, -1).shift_prime(k + 1, 1)
            if ctx.below_cutoff(target):
                out._add_to(target, float((k + 1) * c) * coeff)
    return out


def d1(t: FormalSeries, axis: int = 0) -> FormalSeries:
    """The polynomial derivation: d/d z_x along one axis."""
    ctx = t.ctx
    out = FormalSeries(ctx)
    for beta, coeff in t.terms.items():
        if beta.beta_x[axis] == 0:
            continue
        target = beta.shift_x(axis, -1)
        out._add_to(target, float(beta.beta_x[axis]) * coeff)
    return out


def proj_P(t: FormalSeries) -> FormalSeries:
    """Projection onto the polynomial sector (beta_x != 0, beta' = 0)."""
    out = FormalSeries(t.ctx)
    for beta, coeff in t.terms.items():
        if beta.is_purely_polynomial and beta.poly_order > 0:
            out._set(beta, coeff)
    return out


def proj_minus(t: FormalSeries) -> FormalSeries:
    """Complementary projection: kills exactly the polynomial-sector keys."""
    out = FormalSeries(t.ctx)
    for beta, coeff in t.terms.items():
        if not (beta.is_purely_polynomial and beta.poly_order > 0):
            out._set(beta, coeff)
    return out


@dataclass
class GradedNorm:
    n0: float
    per_homogeneity: Dict[Fraction, float] = field(default_factory=dict)

    def get(self, h: Fraction) -> float:
        return self.per_homogeneity.get(h, 0.0)

    def total(self) -> float:
        return max(self.per_homogeneity.values(), default=0.0)


def graded_norm(t: FormalSeries, n0: float,
                window: EllipticityWindow = None) -> GradedNorm:
    """N0^{-angle} * max over same-homogeneity keys and the level center
    grid of the coefficient magnitude."""
    if not 0 < n0 <= 1:
        raise ValueError("n0 must lie in (0,1]")
    ctx = t.ctx
    if window is None:
        window = ctx.window
    out: Dict[Fraction, float] = {}
    for beta, coeff in t.terms.items():
        h = ctx.hv(beta)
        level = beta.angle
        mag = 0.0
        for a0 in window.centers(level):
            mag = max(mag, float(np.max(np.abs(coeff.eval(a0)))))
        val = (n0 ** (-level)) * mag
        out[h] = max(out.get(h, 0.0), val)
    return GradedNorm(n0, out)


def _is_zero_coeff(coeff) -> bool:
    if coeff is None:
        return True
    if isinstance(coeff, Jet):
        return not np.any(coeff.coeffs)
    zero = getattr(coeff, "is_zero", None)
    return bool(zero) if zero is not None else False
