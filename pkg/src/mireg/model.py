"""Stationary and centered models on the torus.

The stationary model is built by a triangular recursion in homogeneity:
each component's singular part is assembled from strictly lower ones,
then inverted through the heat solver.  Centered models subtract affine
polynomials so components vanish to first order at a base point; the
re-centering is an element of the structure group acting on the
stationary model, which makes re-expansion between base points a group
computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fields import (AffinePart, NoiseSpec, PolyField, TorusGrid, heat_apply,
                     heat_solve, sample_noise)
from .group import GroupElement, apply as group_apply, series_max_diff
from .indices import IndexSet, MultiIndex, homogeneity
from .jets import Jet, max_abs_diff
from .series import (Context, FormalSeries, d0, monomial, mul, unit, z_prime,
                     z_x)


@dataclass
class RenormVector:
    """Counter-term coefficients q_{beta'} as scalar jets in a0, keyed by
    the multi-index (0, beta'); no spatial decoration by construction."""

    components: Dict[MultiIndex, Jet] = field(default_factory=dict)
    stderr: Dict[MultiIndex, np.ndarray] = field(default_factory=dict)
    ensemble_size: int = 0

    @staticmethod
    def keys_for(ctx: Context, iset: IndexSet, n: int) -> List[MultiIndex]:
        return [b for b in iset.active()
                if b.poly_order == 0 and b.scaled_norm <= n - 1]

    def as_series(self, ctx: Context) -> FormalSeries:
        out = FormalSeries(ctx)
        for beta, jet in self.components.items():
            out._set(beta, jet)
        return out

    def copy(self) -> "RenormVector":
        return RenormVector({b: j.copy() for b, j in self.components.items()},
                            {b: e.copy() for b, e in self.stderr.items()},
                            self.ensemble_size)

    def max_abs(self) -> float:
        return max((j.max_abs() for j in self.components.values()),
                   default=0.0)


def laplacian_series(t: FormalSeries) -> FormalSeries:
    out = FormalSeries(t.ctx)
    for beta, coeff in t.terms.items():
        out._set(beta, coeff.laplacian())
    return out


def pi_minus_series(ctx: Context, grid: TorusGrid, pi: FormalSeries,
                    q_series: FormalSeries,
                    xi: Optional[np.ndarray] = None) -> FormalSeries:
    """The singular part: sum_{k>=1} z_k Pi^k Lap(Pi) - sum_{k>=0}
    (1/k!) Pi^k (D0)^k q + xi 1.

    Factor order matters: the scalar chain (z_k Lap(Pi), or the derived
    q series) is absorbed before the Pi powers, so every pairing of two
    linear-part coefficients is pruned by the cutoff before it is formed."""
    acc = FormalSeries(ctx)
    lap = laplacian_series(pi)
    k = 1
    while ctx.alpha * (k + 1) < ctx.cutoff_val:
        base = mul(z_prime(ctx, k), lap)
        for _ in range(k):
            if base.is_zero:
                break
            base = mul(base, pi)
        acc = acc + base
        k += 1
    if not q_series.is_zero:
        acc = acc - q_series
        chain = q_series
        k = 1
        while True:
            chain = d0(chain)
            if chain.is_zero:
                break
            term = (1.0 / math.factorial(k)) * chain
            for _ in range(k):
                if term.is_zero:
                    break
                term = mul(term, pi)
            acc = acc - term
            k += 1
    if xi is not None:
        co = np.zeros(grid.shape + (ctx.jet_order + 1,))
        co[..., 0] = xi
        acc = acc + monomial(ctx, MultiIndex.zero(ctx.d),
                             PolyField(grid, Jet(co, ctx.center)))
    return acc


def _as_field(coeff, grid: TorusGrid) -> PolyField:
    if isinstance(coeff, PolyField):
        return coeff
    if coeff.shape == grid.shape:
        return PolyField(grid, coeff)
    return PolyField.from_scalar(grid, coeff)


@dataclass
class ModelField:
    """Stationary model: Pi and Pi-minus component fields plus the affine
    correction record per index."""

    ctx: Context
    grid: TorusGrid
    iset: IndexSet
    xi: np.ndarray
    q: RenormVector
    pi: FormalSeries
    pi_minus: FormalSeries
    corrections: Dict[MultiIndex, AffinePart]
    _grad_cache: Dict[Tuple[MultiIndex, int], PolyField] = field(
        default_factory=dict, repr=False)
    _lap_cache: Dict[MultiIndex, PolyField] = field(
        default_factory=dict, repr=False)

    def grad_field(self, beta: MultiIndex, axis: int) -> PolyField:
        key = (beta, axis)
        if key not in self._grad_cache:
            self._grad_cache[key] = _as_field(self.pi.coeff(beta),
                                              self.grid).grad(axis)
        return self._grad_cache[key]

    def lap_field(self, beta: MultiIndex) -> PolyField:
        if beta not in self._lap_cache:
            self._lap_cache[beta] = _as_field(self.pi.coeff(beta),
                                              self.grid).laplacian()
        return self._lap_cache[beta]

    def value_series(self, idx: Tuple[int, ...]) -> FormalSeries:
        """Pointwise jets of every Pi component at one grid index."""
        out = FormalSeries(self.ctx)
        for beta, coeff in self.pi.terms.items():
            out._set(beta, _as_field(coeff, self.grid).value_at(idx))
        return out

    def grad_series(self, idx: Tuple[int, ...], axis: int) -> FormalSeries:
        out = FormalSeries(self.ctx)
        for beta in self.pi.terms:
            out._set(beta, self.grad_field(beta, axis).value_at(idx))
        return out

    def lap_series_at(self, idx: Tuple[int, ...]) -> FormalSeries:
        out = FormalSeries(self.ctx)
        for beta in self.pi.terms:
            out._set(beta, self.lap_field(beta).value_at(idx))
        return out

    def chart_point(self, idx: Tuple[int, ...]) -> np.ndarray:
        return np.array([float(np.ravel(self.grid.coords(i))[idx[1 + i]])
                         for i in range(self.grid.d)])

    def chart_full(self, idx: Tuple[int, ...]) -> np.ndarray:
        """Space-time chart point (time first)."""
        t = float(self.grid.times()[idx[0]])
        return np.concatenate([[t], self.chart_point(idx)])


def model_levels(ctx: Context, iset: IndexSet) -> List[List[MultiIndex]]:
    """Active indices needing a heat solve, grouped by homogeneity level
    in increasing order (the affine sector is seeded, not solved)."""
    by_level: Dict[Fraction, List[MultiIndex]] = {}
    for beta in iset.active():
        if beta.is_affine:
            continue
        by_level.setdefault(ctx.hv(beta), []).append(beta)
    return [by_level[h] for h in sorted(by_level)]


def _seed_pi(ctx: Context, grid: TorusGrid) -> FormalSeries:
    pi = FormalSeries(ctx)
    for i in range(ctx.d):
        pi._set(MultiIndex.unit_x(ctx.d, i),
                PolyField.coordinate(grid, i, ctx.center, ctx.jet_order))
    return pi


def build_stationary(ctx: Context, grid: TorusGrid, iset: IndexSet,
                     xi: np.ndarray, q: RenormVector) -> ModelField:
    """Triangular recursion: at each homogeneity level the singular part
    only involves strictly lower components, so one sweep per level with
    a heat solve per index completes the model."""
    q_series = q.as_series(ctx)
    pi = _seed_pi(ctx, grid)
    corrections: Dict[MultiIndex, AffinePart] = {}
    pim = FormalSeries(ctx)
    for level in model_levels(ctx, iset):
        pim = pi_minus_series(ctx, grid, pi, q_series, xi)
        for beta in level:
            rhs = _as_field(pim.coeff(beta), grid)
            u, p = heat_solve(rhs)
            pi._set(beta, u)
            corrections[beta] = p
    pim = pi_minus_series(ctx, grid, pi, q_series, xi)
    return ModelField(ctx, grid, iset, xi, q, pi, pim, corrections)


def estimate_q(ctx: Context, grid: TorusGrid, iset: IndexSet,
               spec: NoiseSpec, ensemble: int, n: int,
               threads: int = 1) -> RenormVector:
    """Ensemble renormalization: in homogeneity order, pick each q
    component so the ensemble-and-space-time mean of its own singular
    component vanishes.  The q component enters that mean with exact
    coefficient -1, so the solve is a plain average of the q-independent
    part.  Ensemble members advance in lockstep so lower components feed
    higher ones."""
    if ensemble < 2:
        raise ValueError("ensemble size must be at least 2")
    qkeys = set(RenormVector.keys_for(ctx, iset, n))
    q = RenormVector(ensemble_size=ensemble)
    xis = [sample_noise(spec.with_seed(spec.seed + m), grid)
           for m in range(ensemble)]
    pis = [_seed_pi(ctx, grid) for _ in range(ensemble)]

    def member_pim(m):
        return pi_minus_series(ctx, grid, pis[m], q.as_series(ctx), xis[m])

    for level in model_levels(ctx, iset):
        pims = _map_members(member_pim, ensemble, threads)
        for beta in level:
            if beta in qkeys:
                member_means = np.stack([
                    grid.jet_mean(_as_field(pims[m].coeff(beta),
                                            grid).per).coeffs
                    for m in range(ensemble)])
                est = np.mean(member_means, axis=0)
                q.components[beta] = Jet(est, ctx.center)
                q.stderr[beta] = (np.std(member_means, axis=0, ddof=1)
                                  / np.sqrt(ensemble))
                # the -1 coefficient: subtract the new component in place
                for m in range(ensemble):
                    co = _as_field(pims[m].coeff(beta), grid)
                    pims[m]._set(beta, co + (-1.0) * q.components[beta])
            for m in range(ensemble):
                u, _ = heat_solve(_as_field(pims[m].coeff(beta), grid))
                pis[m]._set(beta, u)
    return q


def _map_members(fn, ensemble: int, threads: int) -> List:
    if threads <= 1:
        return [fn(m) for m in range(ensemble)]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as ex:
        # ordered collection keeps reductions deterministic
        return list(ex.map(fn, range(ensemble)))


class CenteredModel:
    """Model re-centered at one grid point: components vanish at the base
    point, to first order above homogeneity 1."""

    def __init__(self, base: ModelField, idx: Tuple[int, ...],
                 g: GroupElement):
        self.base = base
        self.idx = tuple(idx)
        self.g = g
        self.x = base.chart_point(self.idx)
        self._fields: Optional[FormalSeries] = None
        self._minus_fields: Optional[FormalSeries] = None

    @property
    def ctx(self) -> Context:
        return self.base.ctx

    @property
    def pi0(self) -> FormalSeries:
        return self.g.pi0

    @property
    def pi1(self) -> Tuple[FormalSeries, ...]:
        return self.g.pi1

    def _constant_shift(self) -> FormalSeries:
        """The series of constant fields pi0_beta.  The sign convention
        follows the re-expansion algebra: the shifted model is the group
        image plus pi0, so pi0 is minus the image's value at the base
        point.  The linear kill needs no extra term: pi1 enters through
        the group action on the z_x slot of the model."""
        ctx, grid = self.ctx, self.base.grid
        out = FormalSeries(ctx)
        for beta, c0 in self.g.pi0.terms.items():
            out._add_to(beta, PolyField.from_scalar(grid, c0))
        return out

    def fields(self) -> FormalSeries:
        """Full centered component fields (computed once, then cached)."""
        if self._fields is None:
            moved = group_apply(self.g, self.base.pi)
            self._fields = moved + self._constant_shift()
        return self._fields

    def minus_fields(self) -> FormalSeries:
        if self._minus_fields is None:
            self._minus_fields = pi_minus_series(
                self.ctx, self.base.grid, self.fields(),
                self.base.q.as_series(self.ctx), self.base.xi)
        return self._minus_fields

    def value_series_at(self, idx: Tuple[int, ...]) -> FormalSeries:
        """Pointwise jets of Pi_x at another grid point, via the pointwise
        action of the re-centering (derivations act slotwise)."""
        moved = group_apply(self.g, self.base.value_series(idx))
        return moved + self.g.pi0


def _center_newton(ctx: Context, iset: IndexSet, vals: FormalSeries,
                   grads: Sequence[FormalSeries],
                   sweeps: int) -> GroupElement:
    """Newton sweep for the re-centering parameters given the model
    values and gradients at the base point (scalar jets for one point, or
    grid-shaped jets for every point at once: the update is pointwise in
    the base point, so the same loop serves both)."""
    g = GroupElement(FormalSeries(ctx),
                     tuple(FormalSeries(ctx) for _ in range(ctx.d)))
    for _ in range(sweeps):
        moved = group_apply(g, vals)
        new_pi0 = FormalSeries(ctx)
        for beta in iset.active():
            new_pi0._set(beta, -1.0 * moved.coeff(beta))
        new_pi1 = []
        change = series_max_diff(new_pi0, g.pi0)
        for i in range(ctx.d):
            gi = group_apply(g, grads[i])
            s = g.pi1[i].copy()
            for beta in iset.active():
                if ctx.hv(beta) > 1:
                    s._add_to(beta, -1.0 * gi.coeff(beta))
            new_pi1.append(s)
            change = max(change, series_max_diff(s, g.pi1[i]))
        g = GroupElement(new_pi0, tuple(new_pi1))
        if change < 1e-14:
            break
    return g


def center(model: ModelField, idx: Tuple[int, ...],
           sweeps: Optional[int] = None) -> CenteredModel:
    """Find the re-centering group element at one grid point.

    The conditions are Pi_x(x) = 0 and, above homogeneity 1,
    grad Pi_x(x) = 0.  The linear kill is performed by pi1 inside the
    group action (it shifts the z_x slot), so the gradient condition is a
    residual equation in pi1 and the sweep is a Newton update; both
    conditions are triangular in homogeneity and converge in a few
    sweeps."""
    ctx = model.ctx
    vals = model.value_series(idx)
    grads = [model.grad_series(idx, i) for i in range(ctx.d)]
    if sweeps is None:
        sweeps = 3 * (len(model_levels(ctx, model.iset)) + 2)
    g = _center_newton(ctx, model.iset, vals, grads, sweeps)
    return CenteredModel(model, idx, g)


def center_all(model: ModelField, sweeps: Optional[int] = None,
               t_stride: int = 1) -> GroupElement:
    """Re-centering parameters at every grid point at once: pi0 and pi1
    come out as fields over the base point (grid-shaped jets).  The sweep
    is pointwise in the base point, so restricting to every t_stride-th
    time slice is exact on the retained points and divides the memory
    footprint accordingly."""
    ctx, grid = model.ctx, model.grid

    def sliced(jet: Jet) -> Jet:
        if t_stride == 1:
            return jet
        return Jet(jet.coeffs[::t_stride], jet.center, jet.stale)

    vals = FormalSeries(ctx)
    for beta in model.pi.terms:
        vals._set(beta, sliced(_as_field(model.pi.coeff(beta),
                                         grid).chart_values()))
    grads = []
    for i in range(ctx.d):
        gs = FormalSeries(ctx)
        for beta in model.pi.terms:
            gs._set(beta, sliced(model.grad_field(beta, i).chart_values()))
        grads.append(gs)
    if sweeps is None:
        sweeps = 3 * (len(model_levels(ctx, model.iset)) + 2)
    return _center_newton(ctx, model.iset, vals, grads, sweeps)


def connect(cx: CenteredModel, cy: CenteredModel) -> GroupElement:
    """The re-expansion map between base points: pi0 is the evaluation of
    the x-centered model at y; pi1 comes from composing the re-centering
    maps on the generator z_x."""
    ctx = cx.ctx
    pi0_yx = cx.value_series_at(cy.idx)
    # z_x image of the inverse of the y-centering, by fixed point
    pi1_yx = []
    for i in range(ctx.d):
        s = z_x(ctx, i)
        for _ in range(12):
            r = group_apply(cy.g, s) - z_x(ctx, i)
            if _series_zero(r):
                break
            s = s - r
        img = group_apply(cx.g, s)
        pi1_yx.append(img - z_x(ctx, i))
    return GroupElement(pi0_yx, tuple(pi1_yx))


def _series_zero(s: FormalSeries, tol: float = 0.0) -> bool:
    for coeff in s.terms.values():
        if coeff.max_abs() > tol:
            return False
    return True


def check_centering(cm: CenteredModel) -> float:
    """Max deviation from Pi_x(x) = 0 and grad Pi_x(x) = 0 above
    homogeneity 1 (pointwise, no fields needed)."""
    ctx = cm.ctx
    dev = 0.0
    v = cm.value_series_at(cm.idx)
    for beta, coeff in v.terms.items():
        dev = max(dev, coeff.max_abs())
    for i in range(ctx.d):
        gi = group_apply(cm.g, cm.base.grad_series(cm.idx, i))
        for beta, coeff in gi.terms.items():
            if ctx.hv(beta) > 1:
                dev = max(dev, coeff.max_abs())
    return dev


def check_reexpansion(cx: CenteredModel, cy: CenteredModel,
                      g_yx: GroupElement) -> float:
    """Residual of Gamma_yx Pi_y = Pi_x - pi0_yx as fields, max over
    components and the grid."""
    grid = cx.base.grid
    moved = group_apply(g_yx, cy.fields())
    target = cx.fields()
    dev = 0.0
    for beta in set(moved.terms) | set(target.terms) | set(g_yx.pi0.terms):
        lhs = _as_field(moved.coeff(beta), grid)
        rhs = (_as_field(target.coeff(beta), grid)
               + (-1.0) * g_yx.pi0.coeff(beta))
        dev = max(dev, _field_diff(lhs, rhs))
    return dev


def check_minus_reexpansion(cx: CenteredModel, cy: CenteredModel,
                            g_yx: GroupElement) -> float:
    """Residual of the singular-part re-expansion: Gamma_yx PiMinus_y =
    PiMinus_x - sum_{k>=1} pi0_yx^k z_k Lap(Pi_x)."""
    ctx, grid = cx.ctx, cx.base.grid
    moved = group_apply(g_yx, cy.minus_fields())
    target = cx.minus_fields()
    lap_x = laplacian_series(cx.fields())
    corr = FormalSeries(ctx)
    pw = unit(ctx)
    k = 1
    while True:
        pw = mul(pw, g_yx.pi0)
        if pw.is_zero:
            break
        term = mul(mul(pw, z_prime(ctx, k)), lap_x)
        if term.is_zero and (1 + k) * ctx.alpha >= ctx.cutoff_val:
            break
        corr = corr + term
        k += 1
    dev = 0.0
    for beta in set(moved.terms) | set(target.terms) | set(corr.terms):
        lhs = _as_field(moved.coeff(beta), grid)
        rhs = _as_field(target.coeff(beta), grid)
        if beta in corr.terms:
            rhs = rhs + (-1.0) * _as_field(corr.coeff(beta), grid)
        dev = max(dev, _field_diff(lhs, rhs))
    return dev


def _field_diff(a: PolyField, b: PolyField) -> float:
    """Max coefficient deviation between two fields over jet slots fresh
    on both sides."""
    dev = max_abs_diff(a.per, b.per)
    if a.lin is not None or b.lin is not None:
        for la, lb in zip(a._lin_or_zeros(), b._lin_or_zeros()):
            dev = max(dev, max_abs_diff(la, lb))
    return dev


def check_pointwise_minus(cm: CenteredModel) -> float:
    """Residual of PiMinus_x(x) = xi(x) 1 - q, evaluated from the full
    centered fields."""
    ctx, grid = cm.ctx, cm.base.grid
    pm = cm.minus_fields()
    dev = 0.0
    for beta, coeff in pm.terms.items():
        v = _as_field(coeff, grid).value_at(cm.idx)
        target = np.zeros(ctx.jet_order + 1)
        if beta.is_zero:
            target[0] = cm.base.xi[cm.idx]
        if beta in cm.base.q.components:
            target = target - cm.base.q.components[beta].coeffs
        dev = max(dev, float(np.max(np.abs(
            v.coeffs[: v.valid_slots()] - target[: v.valid_slots()]))))
    return dev


def _eval_valid(arr: Jet, a0: float) -> np.ndarray:
    """Horner evaluation restricted to the reliable leading slots."""
    v = arr.valid_slots()
    h = a0 - arr.center
    out = np.array(arr.coeffs[..., v - 1], copy=True)
    for j in range(v - 2, -1, -1):
        out = out * h + arr.coeffs[..., j]
    return out


def _conv_chart_series(ctx: Context, grid: TorusGrid, src: FormalSeries,
                       rho, lam: float,
                       t_stride: int = 1) -> FormalSeries:
    """Chart values of every component, convolved at scale lambda.

    The plain periodic convolution is the faithful discretization: a
    spatially flat slice passes through the spatial directions unchanged
    (unit mass) while still being smoothed in time, so the finite-volume
    spatial zero mode needs no special casing."""
    from .calculus import convolve
    out = FormalSeries(ctx)
    for beta, coeff in src.terms.items():
        arr = _as_field(coeff, grid).chart_values()
        vals = convolve(arr.coeffs, grid, rho, lam)
        out._set(beta, Jet(vals[::t_stride], arr.center, arr.stale))
    return out


def _seam_mask(grid: TorusGrid, lam: float,
               radius: float = 1.0) -> np.ndarray:
    """Base points whose kernel support avoids the spatial chart seam.
    The linear parts of composed coefficients are chart coordinates,
    discontinuous there, and the convolution is corrupted within the
    kernel radius of the jump."""
    mask = np.ones(grid.shape, dtype=bool)
    margin = radius * lam + 2 * grid.dx
    for i in range(grid.d):
        mask &= (np.abs(grid.coords(i)) < 0.5 - margin) * np.ones(
            grid.shape, dtype=bool)
    return mask


def _level_rms(ctx: Context, series: FormalSeries, n0: float,
               mask: np.ndarray,
               skip_affine: bool = True) -> Dict[Fraction, float]:
    """Per homogeneity level: N0-weighted max over indices and window
    centers of the root mean square over the masked base points."""
    out: Dict[Fraction, float] = {}
    for beta, coeff in series.terms.items():
        if beta.is_dormant or (skip_affine and beta.is_affine):
            continue
        w = float(n0) ** (-int(beta.angle))
        top = 0.0
        for a0 in ctx.window.centers(int(beta.angle)):
            v = _eval_valid(coeff, a0)
            top = max(top, float(np.sqrt(np.mean(v[mask] ** 2))))
        h = ctx.hv(beta)
        out[h] = max(out.get(h, 0.0), w * top)
    return out


def scaling_norms(model: ModelField, rho, lambdas: Sequence[float],
                  n0: float,
                  g: Optional[GroupElement] = None,
                  t_stride: int = 1) -> Dict[Fraction, List[float]]:
    """Scaling of the centered model tested against the kernel at every
    base point at once: the quantity at level |beta| and scale lambda is
    the rms over base points x of (Pi_x * rho_lambda)(x), graded like the
    model norms.  The re-centering acts on coefficients only, so it
    commutes with the convolution in the running point; applying the
    all-points group element to the convolved stationary components gives
    the diagonal directly.  The affine sector is the chart coordinate
    y - x exactly, whose sup over the lambda-ball is lambda; an even
    kernel annihilates it, so that level is reported in closed form."""
    ctx, grid = model.ctx, model.grid
    if g is None:
        g = center_all(model, t_stride=t_stride)
    out: Dict[Fraction, List[float]] = {}
    affine_levels = {ctx.hv(b) for b in model.pi.terms if b.is_affine}
    for lam in lambdas:
        moved = group_apply(g, _conv_chart_series(ctx, grid, model.pi,
                                                  rho, lam,
                                                  t_stride=t_stride))
        # the constant shift survives convolution with unit mass
        for beta in set(moved.terms) | set(g.pi0.terms):
            if beta in g.pi0.terms:
                moved._add_to(beta, g.pi0.coeff(beta))
        mask = _seam_mask(grid, lam,
                          rho.support_radius)[::t_stride]
        for h, v in _level_rms(ctx, moved, n0, mask).items():
            out.setdefault(h, []).append(v)
        for h in affine_levels:
            out.setdefault(h, []).append(lam)
    return out


def minus_scaling_norms(model: ModelField, rho, lambdas: Sequence[float],
                        n0: float,
                        g: Optional[GroupElement] = None,
                        t_stride: int = 1) -> Dict[Fraction, List[float]]:
    """Same diagonal rms statistic for the singular part, using its
    re-centering identity: PiMinus_x is the group image of the stationary
    PiMinus plus sum_k pi0^k z_k Lap(Pi_x), and every factor acts on
    coefficients only, hence commutes with the convolution."""
    from .series import mul, unit, z_prime
    ctx, grid = model.ctx, model.grid
    if g is None:
        g = center_all(model, t_stride=t_stride)
    lap = FormalSeries(ctx)
    for beta in model.pi.terms:
        lap._set(beta, model.lap_field(beta))
    out: Dict[Fraction, List[float]] = {}
    for lam in lambdas:
        src = FormalSeries(ctx)
        for beta in model.pi_minus.terms:
            if not beta.is_dormant:
                src._set(beta, model.pi_minus.coeff(beta))
        total = group_apply(g, _conv_chart_series(ctx, grid, src, rho, lam,
                                                  t_stride=t_stride))
        lap_moved = group_apply(g, _conv_chart_series(ctx, grid, lap,
                                                      rho, lam,
                                                      t_stride=t_stride))
        pw = unit(ctx)
        k = 1
        while True:
            pw = mul(pw, g.pi0)
            if pw.is_zero:
                break
            term = mul(mul(pw, z_prime(ctx, k)), lap_moved)
            if term.is_zero and (1 + k) * ctx.alpha >= ctx.cutoff_val:
                break
            total = total + term
            k += 1
        mask = _seam_mask(grid, lam,
                          rho.support_radius)[::t_stride]
        for h, v in _level_rms(ctx, total, n0, mask).items():
            out.setdefault(h, []).append(v)
    return out


def check_assumptions(model: ModelField, n0: float, rho,
                      lambdas: Sequence[float],
                      base_indices: Sequence[Tuple[int, ...]]) -> Dict:
    """Measurement report for the model axioms: convolution scaling
    slopes of Pi and PiMinus per homogeneity, re-expansion and pointwise
    residuals, compatibility after affine fit, and re-expansion map
    constants per level."""
    from .calculus import fit_loglog_slope, parabolic_distance
    from .group import gamma_bound_check
    ctx = model.ctx
    centered = [center(model, idx) for idx in base_indices]
    report: Dict = {"pi_slopes": {}, "pi_minus_slopes": {},
                    "levels": {}, "residuals": {}, "gamma_constants": {}}
    g_all = center_all(model)
    pi_acc = scaling_norms(model, rho, lambdas, n0, g=g_all)
    pim_acc = minus_scaling_norms(model, rho, lambdas, n0, g=g_all)
    for h, vals in pi_acc.items():
        report["pi_slopes"][h] = fit_loglog_slope(lambdas, vals)
        report["levels"][h] = vals
    for h, vals in pim_acc.items():
        report["pi_minus_slopes"][h] = fit_loglog_slope(lambdas, vals)
    report["residuals"]["centering"] = max(
        check_centering(cm) for cm in centered)
    report["residuals"]["pointwise_minus"] = max(
        check_pointwise_minus(cm) for cm in centered)
    report["residuals"]["compatibility"] = max(
        check_compatibility(cm) for cm in centered)
    reexp = []
    minus_reexp = []
    gamma_c: Dict = {}
    for cx in centered:
        for cy in centered:
            if cy is cx:
                continue
            g = connect(cx, cy)
            reexp.append(check_reexpansion(cx, cy, g))
            minus_reexp.append(check_minus_reexpansion(cx, cy, g))
            dist = parabolic_distance(model.chart_full(cx.idx),
                                      model.chart_full(cy.idx))
            probe = cy.base.value_series(cy.idx)
            for h, c in gamma_bound_check(g, probe, n0, dist).items():
                prev = gamma_c.get(h, 0.0)
                if np.isfinite(c):
                    gamma_c[h] = max(prev, float(c))
    report["residuals"]["reexpansion"] = max(reexp) if reexp else 0.0
    report["residuals"]["minus_reexpansion"] = (max(minus_reexp)
                                               if minus_reexp else 0.0)
    report["gamma_constants"] = gamma_c
    return report


def check_reflection_symmetry(ctx: Context, grid: TorusGrid, iset: IndexSet,
                              spec: NoiseSpec, ensemble: int, n: int,
                              threads: int = 1) -> Dict[MultiIndex, Tuple[float, float]]:
    """Ensemble means of the singular components with one polynomial
    slot: point-reflection invariance of the noise law forces these to
    vanish, so no counter-term is needed; returns (|mean|, stderr)."""
    q = estimate_q(ctx, grid, iset, spec, ensemble, n, threads)
    xis = [sample_noise(spec.with_seed(spec.seed + m), grid)
           for m in range(ensemble)]
    out: Dict[MultiIndex, Tuple[float, float]] = {}
    samples: Dict[MultiIndex, List[np.ndarray]] = {}
    for m in range(ensemble):
        mf = build_stationary(ctx, grid, iset, xis[m], q)
        for beta in mf.pi_minus.terms:
            if beta.poly_order == 1 and not beta.is_affine:
                fld = _as_field(mf.pi_minus.coeff(beta), grid)
                samples.setdefault(beta, []).append(
                    grid.jet_mean(fld.per).coeffs)
    for beta, vals in samples.items():
        arr = np.stack(vals)
        mean = np.mean(arr, axis=0)
        stderr = np.std(arr, axis=0, ddof=1) / np.sqrt(ensemble)
        out[beta] = (float(np.max(np.abs(mean))),
                     float(np.max(stderr)))
    return out


def check_compatibility(cm: CenteredModel) -> float:
    """Residual of (d_t - a0 Lap) Pi_x = PiMinus_x - P_x after fitting the
    affine P_x per component and jet slot.  The comparison lives in the
    range of the discrete operator: the spatial-mean time-Nyquist mode,
    which no symbol can produce, is projected out first."""
    ctx, grid = cm.ctx, cm.base.grid
    pm = cm.minus_fields()
    dev = 0.0
    coords = [np.broadcast_to(grid.coords(i), grid.shape).ravel()
              for i in range(grid.d)]
    ones = np.ones(grid.npoints)
    design = np.stack([ones] + coords, axis=1)
    for beta, coeff in cm.fields().terms.items():
        forward = heat_apply(_as_field(coeff, grid))
        resid = (forward - _as_field(pm.coeff(beta), grid)).project_range()
        rc = resid.chart_values()
        slots = rc.valid_slots()
        for m in range(slots):
            y = rc.coeffs[..., m].ravel()
            sol, *_ = np.linalg.lstsq(design, y, rcond=None)
            dev = max(dev, float(np.max(np.abs(y - design @ sol))))
    return dev
