"""Truncated Taylor jets in the ellipticity parameter.

Every series coefficient and every model component is a polynomial of
degree J in (a0 - center).  Products are Cauchy products truncated at J;
differentiation loses the top slot, which is tracked by a staleness
counter so that downstream comparisons can mask unreliable slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np


class JetError(ValueError):
    pass


class JetBudgetError(JetError):
    """Raised when a jet has no reliable slots left to differentiate."""


def default_order(alpha) -> int:
    """J = ceil(2/alpha) + 1: enough slots for every derivation power the
    grading admits below the cutoff."""
    from math import ceil
    return ceil(2 / float(alpha)) + 1


@dataclass
class Jet:
    """Polynomial in (a0 - center); ``coeffs`` has the Taylor slots on the
    last axis, any leading axes broadcast (scalar jets vs grid jets)."""

    coeffs: np.ndarray
    center: float
    stale: int = 0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)

    @property
    def order(self) -> int:
        return self.coeffs.shape[-1] - 1

    @property
    def shape(self):
        return self.coeffs.shape[:-1]

    def valid_slots(self) -> int:
        """Number of leading Taylor slots that are reliable."""
        return self.coeffs.shape[-1] - self.stale

    def copy(self) -> "Jet":
        return Jet(self.coeffs.copy(), self.center, self.stale)

    def _compat(self, other: "Jet"):
        if abs(self.center - other.center) > 1e-14:
            raise JetError(f"center mismatch: {self.center} vs {other.center}")
        if self.order != other.order:
            raise JetError(f"order mismatch: {self.order} vs {other.order}")

    def __add__(self, other):
        if isinstance(other, Jet):
            self._compat(other)
            return Jet(self.coeffs + other.coeffs, self.center,
                       max(self.stale, other.stale))
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Jet):
            self._compat(other)
            return Jet(self.coeffs - other.coeffs, self.center,
                       max(self.stale, other.stale))
        return NotImplemented

    def __neg__(self):
        return Jet(-self.coeffs, self.center, self.stale)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        if np.isscalar(other):
            return Jet(self.coeffs * other, self.center, self.stale)
        return NotImplemented

    __rmul__ = __mul__

    def times_a0(self) -> "Jet":
        """Multiply by a0 = center + h exactly (degree stays <= J only if
        the top slot is free; the overflow is truncated like any product)."""
        out = self.center * self.coeffs
        out[..., 1:] += self.coeffs[..., :-1]
        return Jet(out, self.center, self.stale)

    def ddiff(self) -> "Jet":
        return jet_ddiff(self)

    def eval(self, a0) -> np.ndarray:
        return jet_eval(self, a0)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    @staticmethod
    def constant(value, center: float, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (order + 1,))
        coeffs[..., 0] = value
        return Jet(coeffs, center)

    @staticmethod
    def variable(center: float, order: int) -> "Jet":
        """The jet of a0 itself."""
        coeffs = np.zeros(order + 1)
        coeffs[0] = center
        if order >= 1:
            coeffs[1] = 1.0
        return Jet(coeffs, center)

    @staticmethod
    def zeros(shape, center: float, order: int) -> "Jet":
        return Jet(np.zeros(tuple(shape) + (order + 1,)), center)


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Cauchy product truncated at the shared order."""
    a._compat(b)
    n = a.order + 1
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.zeros(shape + (n,))
    for j in range(n):
        # slot j = sum_{i<=j} a_i * b_{j-i}
        for i in range(j + 1):
            out[..., j] += a.coeffs[..., i] * b.coeffs[..., j - i]
    return Jet(out, a.center, max(a.stale, b.stale))


def jet_ddiff(a: Jet) -> Jet:
    """d/da0: shift-and-scale, output re-padded with a trailing zero and a
    staleness bump."""
    if a.order < 1:
        raise JetError("cannot differentiate an order-0 jet")
    if a.valid_slots() <= 1:
        raise JetBudgetError("jet derivative budget exhausted")
    n = a.order + 1
    out = np.zeros_like(a.coeffs)
    mult = np.arange(1, n)
    out[..., : n - 1] = a.coeffs[..., 1:] * mult
    return Jet(out, a.center, a.stale + 1)


def jet_eval(a: Jet, a0) -> np.ndarray:
    """Horner evaluation at a0 (scalar or array broadcastable to the jet)."""
    h = np.asarray(a0, dtype=float) - a.center
    out = np.asarray(a.coeffs[..., -1]) * np.ones_like(h)
    for j in range(a.order - 1, -1, -1):
        out = out * h + a.coeffs[..., j]
    return out


def max_abs_diff(a: Jet, b: Jet, slots: int = None) -> float:
    """Max coefficient deviation over the slots reliable on both sides."""
    a._compat(b)
    if slots is None:
        slots = min(a.valid_slots(), b.valid_slots())
    if slots <= 0:
        return 0.0
    d = a.coeffs[..., :slots] - b.coeffs[..., :slots]
    return float(np.max(np.abs(d))) if d.size else 0.0


@dataclass
class EllipticityWindow:
    """Nested evaluation intervals around I = [lam, 1/lam]: higher angle
    levels evaluate on a smaller superset of I, mirroring nested discs."""

    lam: float
    n_centers: int = 5
    pad0: float = 0.25
    max_level: int = 12
    nested_pads: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValueError("lambda must lie in (0,1)")
        if not self.nested_pads:
            self.nested_pads = [self.pad0 * 0.5 ** m
                                for m in range(self.max_level + 1)]

    @property
    def interval(self):
        return (self.lam, 1.0 / self.lam)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lam + 1.0 / self.lam)

    def level_interval(self, level: int):
        """Evaluation interval for angle `level` (clamped to the deepest pad)."""
        pad = self.nested_pads[min(max(level, 0), len(self.nested_pads) - 1)]
        lo = self.lam / (1.0 + pad)
        hi = (1.0 / self.lam) * (1.0 + pad)
        return lo, hi

    def centers(self, level: int) -> np.ndarray:
        lo, hi = self.level_interval(level)
        return np.linspace(lo, hi, self.n_centers)

    def contains(self, a0: float, level: int = 0) -> bool:
        lo, hi = self.level_interval(level)
        return lo <= a0 <= hi
