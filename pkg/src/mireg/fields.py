"""Periodic space-time fields, mollified Gaussian noise, and the heat solver.

Grid functions live on the unit torus in space and time.  Model components
carry an a0-jet on the trailing axis, so a grid field is a Jet whose
coefficient array has shape (nt, nx, ..., J+1).  Linear-in-space parts,
which are not periodic, are kept symbolically as PolyField coefficients
and only materialized through a centered chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .jets import Jet, JetError


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the unit space-time torus: axis 0 is time, axes
    1..d are space.  nx must be a power of two."""

    d: int
    nx: int
    nt: int
    period_x: float = 1.0
    period_t: float = 1.0

    def __post_init__(self):
        if self.nx & (self.nx - 1) or self.nx <= 0:
            raise ValueError("nx must be a power of two")
        if self.nt <= 0:
            raise ValueError("nt must be positive")
        if self.period_x != 1.0 or self.period_t != 1.0:
            raise ValueError("periods are fixed to 1")

    @property
    def dx(self) -> float:
        return self.period_x / self.nx

    @property
    def dt(self) -> float:
        return self.period_t / self.nt

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.nt,) + (self.nx,) * self.d

    @property
    def axes(self) -> Tuple[int, ...]:
        return tuple(range(self.d + 1))

    @property
    def npoints(self) -> int:
        return self.nt * self.nx ** self.d

    def coords(self, axis: int) -> np.ndarray:
        """Centered chart coordinate in [-1/2, 1/2) along a spatial axis,
        broadcast to the grid shape.  The chart seam sits at x = 1/2."""
        c = (np.arange(self.nx) / self.nx + 0.5) % 1.0 - 0.5
        shape = [1] * (self.d + 1)
        shape[axis + 1] = self.nx
        return c.reshape(shape)

    def times(self) -> np.ndarray:
        shape = [1] * (self.d + 1)
        shape[0] = self.nt
        return (np.arange(self.nt) / self.nt).reshape(shape)

    def wavenumbers(self, axis: int) -> np.ndarray:
        """2*pi*k along spatial `axis`, broadcast to the grid shape; the
        self-conjugate Nyquist mode is zeroed so first-order derivative
        symbols stay Hermitian-symmetric on real fields."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)
        if self.nx % 2 == 0:
            k[self.nx // 2] = 0.0
        shape = [1] * (self.d + 1)
        shape[axis + 1] = self.nx
        return k.reshape(shape)

    def frequencies(self) -> np.ndarray:
        """2*pi*omega along the time axis, Nyquist zeroed (see
        `wavenumbers`), broadcast to the grid shape."""
        w = 2.0 * np.pi * np.fft.fftfreq(self.nt, d=self.dt)
        if self.nt % 2 == 0:
            w[self.nt // 2] = 0.0
        shape = [1] * (self.d + 1)
        shape[0] = self.nt
        return w.reshape(shape)

    def k_squared(self) -> np.ndarray:
        """Full |2 pi k|^2 (even symbol, Nyquist kept)."""
        out = np.zeros(self.shape)
        for axis in range(self.d):
            k = 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)
            shape = [1] * (self.d + 1)
            shape[axis + 1] = self.nx
            out = out + k.reshape(shape) ** 2
        return out

    def fft(self, arr: np.ndarray) -> np.ndarray:
        return np.fft.fftn(arr, axes=self.axes)

    def ifft(self, arr: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(arr, axes=self.axes)

    def _apply_symbol(self, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        sym = symbol.reshape(symbol.shape + (1,) * (values.ndim - symbol.ndim))
        return np.real(self.ifft(self.fft(values) * sym))

    def laplacian(self, f: Jet) -> Jet:
        out = self._apply_symbol(f.coeffs, -self.k_squared())
        return Jet(out, f.center, f.stale)

    def grad(self, f: Jet, axis: int) -> Jet:
        out = self._apply_symbol(f.coeffs, 1j * self.wavenumbers(axis))
        return Jet(out, f.center, f.stale)

    def dt_op(self, f: Jet) -> Jet:
        out = self._apply_symbol(f.coeffs, 1j * self.frequencies())
        return Jet(out, f.center, f.stale)

    def project_range(self, f: Jet) -> Jet:
        """Drop the one mode outside the range of the discrete heat
        operator: the spatial mean at the time-Nyquist frequency, whose
        symbol vanishes identically (even nt only)."""
        if self.nt % 2 != 0:
            return f
        fh = self.fft(f.coeffs)
        sl = [slice(None)] * fh.ndim
        sl[0] = self.nt // 2
        for axis in range(self.d):
            sl[1 + axis] = 0
        fh[tuple(sl)] = 0.0
        return Jet(np.real(self.ifft(fh)), f.center, f.stale)

    def mean(self, arr: np.ndarray) -> np.ndarray:
        return np.mean(arr, axis=self.axes)

    def jet_mean(self, f: Jet) -> Jet:
        """Space-time mean slot by slot: a scalar jet."""
        return Jet(self.mean(f.coeffs), f.center, f.stale)

    def zero_jet(self, center: float, order: int) -> Jet:
        return Jet.zeros(self.shape, center, order)


def decay_for_alpha(alpha, d: int) -> float:
    """Fourier decay exponent s with mode std N0 * mu^{-s} producing a
    field of parabolic regularity alpha - 2: s = alpha - 2 + (d + 2)/2."""
    return float(alpha) - 2.0 + 0.5 * (d + 2)


@dataclass(frozen=True)
class NoiseSpec:
    seed: int
    decay: float
    eps: float
    kernel_id: str = "sharp"
    n0: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.kernel_id not in ("sharp", "gauss"):
            raise ValueError(f"unknown spectral kernel {self.kernel_id!r}")

    def with_seed(self, seed: int) -> "NoiseSpec":
        return NoiseSpec(seed, self.decay, self.eps, self.kernel_id, self.n0)


def sample_noise(spec: NoiseSpec, grid: TorusGrid) -> np.ndarray:
    """Stationary periodic Gaussian field: independent Fourier modes with
    std n0 * mu^{-decay} under the parabolic weight mu^2 = |2 pi k|^2 +
    |2 pi omega|, mollified spectrally at scale eps, zero mean.

    Sampled by coloring grid white noise in Fourier space, which gives the
    Hermitian symmetry and the point-reflection invariance of the law for
    free.  Deterministic per seed."""
    if spec.eps < 2 * grid.dx:
        raise ValueError(f"eps={spec.eps} unresolvable: below 2*dx={2 * grid.dx}")
    rng = np.random.default_rng(spec.seed)
    white = rng.standard_normal(grid.shape)
    k2 = grid.k_squared()
    # full |omega| including the time-Nyquist entry: the derivative symbol
    # zeroes it, but the mollifier must damp that row like any other
    wf = 2.0 * np.pi * np.abs(np.fft.fftfreq(grid.nt, d=grid.dt))
    w = wf.reshape((grid.nt,) + (1,) * grid.d) * np.ones(grid.shape)
    mu2 = k2 + np.abs(w)
    with np.errstate(divide="ignore"):
        amp = np.where(mu2 > 0, mu2 ** (-0.5 * spec.decay), 0.0)
    # symmetric spectral mollifier at parabolic scale eps; "sharp" keeps
    # the power-law inertial range clean up to mu ~ 1/eps (a Gaussian
    # shoulder would steepen the top three octaves and contaminate the
    # scaling fits), "gauss" is the classical soft roll-off
    if spec.kernel_id == "sharp":
        amp = amp * np.exp(-0.5 * (spec.eps ** 2 * mu2) ** 8)
    else:
        amp = amp * np.exp(
            -0.5 * (spec.eps ** 2 * k2 + (spec.eps ** 2 * w) ** 2))
    amp[(0,) * (grid.d + 1)] = 0.0
    xi = np.real(grid.ifft(grid.fft(white) * amp))
    # normalize so the field std is n0 at the reference scale
    var = np.mean(amp ** 2)
    if var > 0:
        xi = xi * (spec.n0 / np.sqrt(var))
    return xi


@dataclass
class AffinePart:
    """Affine correction p0 + p1 . y recorded by the heat solver; both
    entries are scalar jets in a0."""

    p0: Jet
    p1: Tuple[Jet, ...]

    @staticmethod
    def zero(d: int, center: float, order: int) -> "AffinePart":
        z = Jet.zeros((), center, order)
        return AffinePart(z.copy(), tuple(z.copy() for _ in range(d)))

    @property
    def is_zero(self) -> bool:
        return (not np.any(self.p0.coeffs)
                and not any(np.any(p.coeffs) for p in self.p1))

    def max_abs(self) -> float:
        vals = [self.p0.max_abs()] + [p.max_abs() for p in self.p1]
        return max(vals)


class PolyField:
    """F = per(t, x) + sum_i y_i * lin_i(t, x) with periodic coefficient
    fields; the linear part is kept symbolic because y_i is not periodic.
    A missing linear part (lin=None) means it vanishes and costs nothing."""

    def __init__(self, grid: TorusGrid, per: Jet,
                 lin: Optional[Tuple[Jet, ...]] = None):
        self.grid = grid
        self.per = per
        self.lin = tuple(lin) if lin is not None else None
        if self.lin is not None and len(self.lin) != grid.d:
            raise ValueError("one linear coefficient per spatial axis")

    @staticmethod
    def zero(grid: TorusGrid, center: float, order: int) -> "PolyField":
        return PolyField(grid, Jet.zeros(grid.shape, center, order))

    @staticmethod
    def coordinate(grid: TorusGrid, axis: int, center: float,
                   order: int) -> "PolyField":
        """The field y_axis."""
        lin = [Jet.zeros(grid.shape, center, order) for _ in range(grid.d)]
        lin[axis] = Jet.constant(np.ones(grid.shape), center, order)
        return PolyField(grid, Jet.zeros(grid.shape, center, order), tuple(lin))

    @staticmethod
    def from_scalar(grid: TorusGrid, value: Jet) -> "PolyField":
        """Broadcast a scalar jet to a constant periodic field."""
        per = Jet(np.broadcast_to(value.coeffs,
                                  grid.shape + value.coeffs.shape[-1:]).copy(),
                  value.center, value.stale)
        return PolyField(grid, per)

    def _lin_or_zeros(self) -> Tuple[Jet, ...]:
        if self.lin is not None:
            return self.lin
        return tuple(Jet.zeros(self.grid.shape, self.center, self.order)
                     for _ in range(self.grid.d))

    @property
    def center(self) -> float:
        return self.per.center

    @property
    def order(self) -> int:
        return self.per.order

    @property
    def stale(self) -> int:
        if self.lin is None:
            return self.per.stale
        return max([self.per.stale] + [l.stale for l in self.lin])

    @property
    def has_linear(self) -> bool:
        return self.lin is not None and any(np.any(l.coeffs) for l in self.lin)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.per.coeffs) and not self.has_linear

    def copy(self) -> "PolyField":
        lin = tuple(l.copy() for l in self.lin) if self.lin is not None else None
        return PolyField(self.grid, self.per.copy(), lin)

    def __add__(self, other):
        if isinstance(other, PolyField):
            if self.lin is None and other.lin is None:
                lin = None
            else:
                lin = tuple(a + b for a, b in zip(self._lin_or_zeros(),
                                                  other._lin_or_zeros()))
            return PolyField(self.grid, self.per + other.per, lin)
        if isinstance(other, Jet):
            return self + PolyField.from_scalar(self.grid, other)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, other):
        if isinstance(other, PolyField):
            if self.has_linear and other.has_linear:
                raise JetError("product of two fields with linear parts "
                               "would leave the degree-1 class")
            per = self.per * other.per
            if self.lin is None and other.lin is None:
                lin = None
            else:
                lin = tuple(a * other.per + self.per * b
                            for a, b in zip(self._lin_or_zeros(),
                                            other._lin_or_zeros()))
            return PolyField(self.grid, per, lin)
        if isinstance(other, Jet) or np.isscalar(other):
            lin = (tuple(other * l for l in self.lin)
                   if self.lin is not None else None)
            return PolyField(self.grid, other * self.per, lin)
        return NotImplemented

    __rmul__ = __mul__

    def _map(self, f) -> "PolyField":
        lin = (tuple(f(l) for l in self.lin)
               if self.lin is not None else None)
        return PolyField(self.grid, f(self.per), lin)

    def times_a0(self) -> "PolyField":
        return self._map(lambda j: j.times_a0())

    def ddiff(self) -> "PolyField":
        return self._map(lambda j: j.ddiff())

    def laplacian(self) -> "PolyField":
        """Lap(per + y_i lin_i) = Lap(per) + 2 d_i lin_i + y_i Lap(lin_i)."""
        g = self.grid
        per = g.laplacian(self.per)
        if self.lin is None:
            return PolyField(g, per)
        for i, l in enumerate(self.lin):
            per = per + 2.0 * g.grad(l, i)
        return PolyField(g, per, tuple(g.laplacian(l) for l in self.lin))

    def grad(self, axis: int) -> "PolyField":
        g = self.grid
        per = g.grad(self.per, axis)
        if self.lin is None:
            return PolyField(g, per)
        per = per + self.lin[axis]
        return PolyField(g, per, tuple(g.grad(l, axis) for l in self.lin))

    def dt(self) -> "PolyField":
        g = self.grid
        return self._map(g.dt_op)

    def affine_mean(self) -> AffinePart:
        """Space-time mean as an affine record (p0, p1)."""
        p1 = tuple(self.grid.jet_mean(l) for l in self._lin_or_zeros())
        return AffinePart(self.grid.jet_mean(self.per), p1)

    def subtract_affine(self, p: AffinePart) -> "PolyField":
        per = self.per - Jet(np.broadcast_to(
            p.p0.coeffs, self.per.coeffs.shape).copy(), p.p0.center, p.p0.stale)
        if p.is_zero and self.lin is None:
            return PolyField(self.grid, per)
        lin = tuple(l - Jet(np.broadcast_to(
            pj.coeffs, l.coeffs.shape).copy(), pj.center, pj.stale)
            for l, pj in zip(self._lin_or_zeros(), p.p1))
        return PolyField(self.grid, per, lin)

    def project_range(self) -> "PolyField":
        """Componentwise removal of the modes outside the range of the
        discrete heat operator (the periodic and each linear coefficient
        carry their own copy of the excluded mode)."""
        per = self.grid.project_range(self.per)
        lin = None if self.lin is None else tuple(
            self.grid.project_range(l) for l in self.lin)
        return PolyField(self.grid, per, lin)

    def chart_values(self) -> Jet:
        """Materialize on the centered chart y in [-1/2, 1/2)^d; only
        meaningful away from the chart seam."""
        out = self.per.coeffs.copy()
        if self.lin is not None:
            for i, l in enumerate(self.lin):
                out = out + self.grid.coords(i)[..., None] * l.coeffs
        return Jet(out, self.center, self.stale)

    def value_at(self, idx: Tuple[int, ...]) -> Jet:
        """Scalar jet at one grid index (chart coordinates for the linear
        part)."""
        out = self.per.coeffs[idx].copy()
        if self.lin is not None:
            for i, l in enumerate(self.lin):
                c = float(np.ravel(self.grid.coords(i))[idx[1 + i]])
                out = out + c * l.coeffs[idx]
        return Jet(out, self.center, self.stale)

    def max_abs(self) -> float:
        vals = [self.per.max_abs()]
        if self.lin is not None:
            vals += [l.max_abs() for l in self.lin]
        return float(max(vals))


def _heat_solve_jet(grid: TorusGrid, rhs: Jet, a_center: float) -> Tuple[Jet, Jet]:
    """Solve (d_t - a0 Lap) u = rhs - p0 with <u> = 0 at every jet order;
    order m obeys d_t u_m - a_c Lap u_m = rhs_m + Lap u_{m-1} - p0_m."""
    k2 = grid.k_squared()
    sym = 1j * (grid.frequencies() * np.ones(grid.shape)) + a_center * k2
    dc = (0,) * (grid.d + 1)
    inv = np.empty_like(sym)
    mask = sym != 0
    inv[mask] = 1.0 / sym[mask]
    inv[~mask] = 0.0

    nslots = rhs.order + 1
    u = np.zeros_like(rhs.coeffs)
    p0 = np.zeros(nslots)
    prev_hat = None
    for m in range(nslots):
        f_hat = grid.fft(rhs.coeffs[..., m])
        if prev_hat is not None:
            f_hat = f_hat - k2 * prev_hat  # Lap u_{m-1} in Fourier
        p0[m] = np.real(f_hat[dc]) / grid.npoints
        u_hat = f_hat * inv
        u_hat[dc] = 0.0
        u[..., m] = np.real(grid.ifft(u_hat))
        prev_hat = u_hat
    return (Jet(u, rhs.center, rhs.stale),
            Jet(p0, rhs.center, rhs.stale))


def heat_solve(rhs, grid: TorusGrid = None,
               a_center: float = None) -> Tuple["PolyField", AffinePart]:
    """Invert (d_t - a0 Lap) on the torus with a0-jet propagation.

    Returns (u, P) with (d_t - a0 Lap) u = rhs - P, P affine, <u> = 0 and
    the linear part of u solved by the ansatz u = y_i v_i + w."""
    if isinstance(rhs, Jet):
        rhs = PolyField(grid, rhs)
    grid = rhs.grid
    if a_center is None:
        a_center = rhs.center
    if rhs.lin is None:
        w, p0 = _heat_solve_jet(grid, rhs.per, a_center)
        zero = Jet.zeros((), rhs.center, rhs.order)
        return (PolyField(grid, w),
                AffinePart(p0, tuple(zero.copy() for _ in range(grid.d))))
    lin_u: List[Jet] = []
    p1: List[Jet] = []
    for q in rhs.lin:
        v, pv = _heat_solve_jet(grid, q, a_center)
        lin_u.append(v)
        p1.append(pv)
    # cross term: (d_t - a0 Lap)(y_i v_i) = y_i (...) - 2 a0 d_i v_i
    per_rhs = rhs.per
    for i, v in enumerate(lin_u):
        per_rhs = per_rhs + 2.0 * grid.grad(v, i).times_a0()
    w, p0 = _heat_solve_jet(grid, per_rhs, a_center)
    u = PolyField(grid, w, tuple(lin_u))
    return u, AffinePart(p0, tuple(p1))


def heat_apply(u: PolyField, a_center: float = None) -> PolyField:
    """The forward operator (d_t - a0 Lap) u, slotwise:
    row m is d_t u_m - a_c Lap u_m - Lap u_{m-1}."""
    grid = u.grid
    if a_center is None:
        a_center = u.center
    lap = u.laplacian()
    out = u.dt() - a_center * lap
    shifted_per = np.zeros_like(lap.per.coeffs)
    shifted_per[..., 1:] = lap.per.coeffs[..., :-1]
    out.per = out.per - Jet(shifted_per, u.center, lap.per.stale)
    if lap.lin is not None:
        new_lin = []
        for o, l in zip(out._lin_or_zeros(), lap.lin):
            shifted = np.zeros_like(l.coeffs)
            shifted[..., 1:] = l.coeffs[..., :-1]
            new_lin.append(o - Jet(shifted, u.center, l.stale))
        out.lin = tuple(new_lin)
    return out
