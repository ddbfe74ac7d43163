"""Modelled distributions: local descriptions of solutions in terms of
the model.

The map f pairs the solution data (u, its generalized gradient nu, and
the derivatives of the coefficient a at u) with the model components
below a cutoff.  The module also provides the counter-term assembled
from the renormalization vector, the modelling norms that quantify how
well (u, nu) is described by the model, the approximate-morphism defect
of the truncated pairing, and interpolation-inequality measurements.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .calculus import BALL_RADIUS, ParabolicMetric, base_lattice
from .group import GroupElement, apply as group_apply
from .indices import MultiIndex
from .jets import Jet
from .model import (CenteredModel, ModelField, RenormVector, _as_field,
                    _eval_valid, center, connect)
from .series import Context, FormalSeries, graded_norm, monomial, mul


class EllipticityError(ValueError):
    """The coefficient a violates its bounds on the range of u."""


@dataclass
class Nonlinearity:
    """The coefficient a with its derivatives and ellipticity constant.

    ``funcs[k]`` evaluates a^(k); the bounds lam <= a <= 1/lam and
    |a^(k)| <= 1/lam are contractual and can be verified on any sampled
    range via `check_range`.
    """

    funcs: Sequence[Callable]
    lam: float

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValueError("ellipticity constant must lie in (0, 1]")
        if not self.funcs:
            raise ValueError("need at least the coefficient itself")

    @property
    def n_derivs(self) -> int:
        return len(self.funcs) - 1

    @staticmethod
    def polynomial(coeffs: Sequence[float], lam: float,
                   n_derivs: int = 6) -> "Nonlinearity":
        p = np.polynomial.Polynomial(list(coeffs))
        funcs = [p]
        for _ in range(n_derivs):
            funcs.append(funcs[-1].deriv())
        return Nonlinearity(funcs, lam)

    @staticmethod
    def constant(value: float, lam: float,
                 n_derivs: int = 6) -> "Nonlinearity":
        return Nonlinearity.polynomial([value], lam, n_derivs)

    def deriv(self, k: int, v):
        if k > self.n_derivs:
            return np.zeros_like(np.asarray(v, dtype=float))
        return np.asarray(self.funcs[k](np.asarray(v, dtype=float)))

    def __call__(self, v):
        return self.deriv(0, v)

    def da_power(self, beta_prime: Sequence[Tuple[int, int]], v):
        """prod_k (a^(k)(v) / k!)^{count} over the slots of beta'."""
        out = np.ones_like(np.asarray(v, dtype=float))
        for k, c in beta_prime:
            out = out * (self.deriv(k, v) / math.factorial(k)) ** c
        return out

    def check_range(self, values: np.ndarray):
        """Verify the ellipticity and derivative bounds on sampled values."""
        a_vals = self(values)
        if np.min(a_vals) < self.lam - 1e-12:
            raise EllipticityError(
                f"a drops to {np.min(a_vals):.4g} below {self.lam}")
        if np.max(a_vals) > 1.0 / self.lam + 1e-12:
            raise EllipticityError(
                f"a rises to {np.max(a_vals):.4g} above {1.0 / self.lam}")
        for k in range(1, self.n_derivs + 1):
            top = float(np.max(np.abs(self.deriv(k, values))))
            if top > 1.0 / self.lam + 1e-12:
                raise EllipticityError(
                    f"|a^({k})| reaches {top:.4g} above {1.0 / self.lam}")


def _chart_distance_field(grid, x: np.ndarray) -> np.ndarray:
    """Parabolic distance to x over the grid: periodic in time, chart
    coordinates in space (linear model parts live on the chart, so the
    spatial difference must not wrap)."""
    t = grid.times().reshape([-1] + [1] * grid.d) - x[0]
    t = t - np.round(t)
    out = np.sqrt(np.abs(t)) * np.ones(grid.shape)
    for i in range(grid.d):
        out = out + np.abs(grid.coords(i) - x[1 + i])
    return out


@dataclass
class ExpansionState:
    """The solution data (u, nu) with the coefficient and the cutoff."""

    grid: object
    u: np.ndarray
    nu: Tuple[np.ndarray, ...]
    a: Nonlinearity
    eta: float

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != self.grid.shape:
            raise ValueError("u must be a grid function")
        self.nu = tuple(np.asarray(n, dtype=float) for n in self.nu)
        if len(self.nu) != self.grid.d:
            raise ValueError("nu needs one component per spatial axis")
        if self.eta <= 0:
            raise ValueError("the cutoff must be positive")
        self.a.check_range(self.u)

    def a0_at(self, idx: Tuple[int, ...]) -> float:
        return float(self.a(self.u[idx]))

    def nu_at(self, idx: Tuple[int, ...]) -> np.ndarray:
        return np.array([n[idx] for n in self.nu])


def _f_weight(state: ExpansionState, beta: MultiIndex,
              idx: Tuple[int, ...]) -> float:
    """nu(x)^{beta_x} da(u(x))^{beta'}."""
    w = 1.0
    for i, p in enumerate(beta.beta_x):
        if p:
            w *= float(state.nu[i][idx]) ** p
    return w * float(state.a.da_power(beta.beta_prime, state.u[idx]))


def eval_f(state: ExpansionState, ctx: Context, idx: Tuple[int, ...],
           tau: FormalSeries, eta: Optional[float] = None) -> float:
    """The pairing f_eta(x).tau = sum over |beta| < eta of
    nu(x)^{beta_x} da(u(x))^{beta'} tau_beta(a(u(x)))."""
    if eta is None:
        eta = state.eta
    a0 = state.a0_at(idx)
    out = 0.0
    for beta, coeff in tau.terms.items():
        if float(ctx.hv(beta)) >= eta:
            continue
        if not ctx.window.contains(a0, max(beta.angle, 0)):
            raise EllipticityError(
                f"a(u(x)) = {a0:.4g} outside the evaluation window at "
                f"angle {beta.angle}")
        out += _f_weight(state, beta, idx) * float(_eval_valid(coeff, a0))
    return out


def gubinelli_nu(state: ExpansionState, cm: CenteredModel) -> np.ndarray:
    """The generalized gradient at the base point of cm:
    nu(x) = grad u(x) - sum over |beta| < 1 of
    da(u(x))^{beta'} grad Pi_{x beta}(x).

    No fixed point is needed: indices below homogeneity 1 carry no
    polynomial decoration, so the right side does not involve nu."""
    grid = state.grid
    ctx = cm.ctx
    a0 = state.a0_at(cm.idx)
    grad_u = _spectral_grads(grid, state.u)
    out = np.empty(grid.d)
    for i in range(grid.d):
        gi = group_apply(cm.g, cm.base.grad_series(cm.idx, i))
        s = 0.0
        for beta, coeff in gi.terms.items():
            if float(ctx.hv(beta)) < 1:
                s += (float(state.a.da_power(beta.beta_prime,
                                             state.u[cm.idx]))
                      * float(_eval_valid(coeff, a0)))
        out[i] = grad_u[i][cm.idx] - s
    return out


def _spectral_grads(grid, u: np.ndarray) -> List[np.ndarray]:
    uh = grid.fft(u)
    return [np.real(grid.ifft(1j * grid.wavenumbers(i) * uh))
            for i in range(grid.d)]


def gubinelli_nu_field(u: np.ndarray, a: Nonlinearity, model: ModelField,
                       g_all: Optional[GroupElement] = None,
                       ) -> Tuple[np.ndarray, ...]:
    """The generalized gradient at every grid point at once.

    The re-centering acts on coefficients only, so applying the
    all-points group element to the gradient components and reading the
    diagonal gives grad Pi_{x beta}(x) as a field over x."""
    from .model import center_all
    grid, ctx = model.grid, model.ctx
    if g_all is None:
        g_all = center_all(model)
    a0 = a(u)
    grad_u = _spectral_grads(grid, u)
    out = []
    for i in range(grid.d):
        gs = FormalSeries(ctx)
        for beta in model.pi.terms:
            gs._set(beta, model.grad_field(beta, i).chart_values())
        moved = group_apply(g_all, gs)
        s = np.zeros(grid.shape)
        for beta, coeff in moved.terms.items():
            if float(ctx.hv(beta)) < 1:
                s = s + a.da_power(beta.beta_prime, u) * _eval_valid(coeff,
                                                                    a0)
        out.append(grad_u[i] - s)
    return tuple(out)


def counter_term(q: RenormVector, a: Nonlinearity, v):
    """h(v) = sum over beta' of da(v)^{beta'} q_{beta'}(a(v))."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    a_vals = a(v)
    for beta, jet in q.components.items():
        out = out + a.da_power(beta.beta_prime, v) * jet.eval(a_vals)
    return out


@dataclass
class ModellingNorms:
    """Discrete maxima of the defining suprema, with maximizer locations."""

    eta: float
    n0: float
    h_u: float
    h_nu: float
    i_u: float
    i_nu: float
    f_opnorm: float
    maximizers: Dict[str, tuple] = field(default_factory=dict)

    def to_csv(self, path: Optional[str] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["quantity", "eta", "value", "maximizer"])
        for name in ("h_u", "h_nu", "i_u", "i_nu", "f_opnorm"):
            writer.writerow([name, self.eta, getattr(self, name),
                             self.maximizers.get(name, "")])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _centered_sample(model: ModelField,
                     base: Sequence[Tuple[int, ...]]) -> Dict[tuple, CenteredModel]:
    return {idx: center(model, idx) for idx in base}


def _f_series_field(state: ExpansionState, cm: CenteredModel,
                    eta: float) -> np.ndarray:
    """f_eta(x).Pi_x(y) over the whole grid: the model-described
    increment of u away from the base point."""
    ctx = cm.ctx
    a0 = state.a0_at(cm.idx)
    out = np.zeros(state.grid.shape)
    for beta, coeff in cm.fields().terms.items():
        if float(ctx.hv(beta)) >= eta:
            continue
        vals = _eval_valid(_as_field(coeff, state.grid).chart_values(), a0)
        out = out + _f_weight(state, beta, cm.idx) * vals
    return out


def modelling_norms(state: ExpansionState, model: ModelField, n0: float,
                    base: Optional[Sequence[Tuple[int, ...]]] = None,
                    eta: Optional[float] = None,
                    centered: Optional[Dict[tuple, CenteredModel]] = None,
                    ) -> ModellingNorms:
    """Measure the modelling quantities on a sampled base lattice.

    h_u: weighted sup over base points x of the best eta-Hoelder constant
    of u(y) - u(x) - f_eta(x).Pi_x(y) over the ball of radius dist_x.
    h_nu: same for the nu increment against the re-expansion parameters,
    with exponent eta - 1 on the half ball (sampled pairs only, since
    each pair needs a re-expansion map).
    f_opnorm: smallest constant in the base-point continuity of f_eta,
    probed on the monomial basis below the cutoff."""
    grid, ctx = state.grid, model.ctx
    if eta is None:
        eta = state.eta
    if base is None:
        base = base_lattice(grid)
    if centered is None:
        centered = _centered_sample(model, base)
    metric = ParabolicMetric()
    origin = np.zeros(1 + grid.d)

    i_u = float(np.max(np.abs(state.u))) + n0
    mx: Dict[str, tuple] = {"i_u": tuple(np.unravel_index(
        np.argmax(np.abs(state.u)), grid.shape))}

    h_u = 0.0
    i_nu = 0.0
    for idx, cm in centered.items():
        x = model.chart_full(idx)
        w = BALL_RADIUS - metric(x, origin)
        if w <= 0:
            continue
        nu_mag = float(np.linalg.norm(state.nu_at(idx)))
        if w * nu_mag > i_nu - n0:
            i_nu = w * nu_mag + n0
            mx["i_nu"] = idx
        dist = _chart_distance_field(grid, x)
        mask = (dist > 0) & (dist < w)
        if not np.any(mask):
            continue
        resid = state.u - state.u[idx] - _f_series_field(state, cm, eta)
        val = w ** eta * float(np.max(np.abs(resid[mask])
                                      / dist[mask] ** eta))
        if val > h_u:
            h_u = val
            mx["h_u"] = idx
    i_nu = max(i_nu, n0)

    h_nu = 0.0
    f_op = 0.0
    probes = _monomial_probes(ctx)
    for ix, cx in centered.items():
        x = model.chart_full(ix)
        w = BALL_RADIUS - metric(x, origin)
        if w <= 0:
            continue
        for iy, cy in centered.items():
            if iy == ix:
                continue
            y = model.chart_full(iy)
            d_yx = metric(y, x)
            if d_yx == 0.0 or d_yx >= 0.5 * w:
                continue
            g = connect(cx, cy)
            # nu increment against the first-order re-expansion data
            for i in range(grid.d):
                pred = eval_f(state, ctx, ix, g.pi1[i], eta)
                resid = (state.nu[i][iy] - state.nu[i][ix] - pred)
                val = w ** eta * abs(resid) / d_yx ** (eta - 1.0)
                if val > h_nu:
                    h_nu = val
                    mx["h_nu"] = (ix, iy)
            # base-point continuity of f on the monomial basis
            for tau in probes:
                lhs = abs(eval_f(state, ctx, iy, tau, eta)
                          - eval_f(state, ctx, ix, group_apply(g, tau), eta))
                gn = graded_norm(tau, n0)
                denom = sum(d_yx ** (eta - float(h)) * v
                            for h, v in gn.per_homogeneity.items()
                            if 0 < float(h) < eta)
                if denom > 0:
                    val = w ** eta * lhs / denom
                    if val > f_op:
                        f_op = val
                        mx["f_opnorm"] = (ix, iy)
    return ModellingNorms(eta, n0, h_u, h_nu, i_u + 0.0, i_nu, f_op, mx)


def _monomial_probes(ctx: Context) -> List[FormalSeries]:
    """The monomial basis of the non-polynomial sector below the cutoff."""
    out = []
    for beta in ctx.index_set.active():
        if beta.is_purely_polynomial and beta.poly_order > 0:
            continue
        out.append(monomial(ctx, beta))
    return out


@dataclass
class MorphismReport:
    constant: float
    worst: tuple
    rows: List[Dict] = field(default_factory=list)


def check_approx_morphism(state: ExpansionState, ctx: Context,
                          idx: Tuple[int, ...],
                          taus: Sequence[FormalSeries],
                          etas: Sequence[float],
                          n0: float) -> MorphismReport:
    """Defect of the product rule for the truncated pairing.

    For monomial factors tau^j supported at gamma_j with
    eta_j <= |gamma_j|, compares f_eta(x).(prod tau^j) with
    prod_j f_{hat-eta_j}(x).tau^j, where
    hat-eta_j = eta - sum_{i != j} (eta_i - alpha); the bound sums
    |nu|^{beta_x} N0^{angle} times the factor norms over the index
    tuples admissible at the full cutoff."""
    eta = state.eta
    alpha = float(ctx.alpha)
    if len(taus) != len(etas):
        raise ValueError("one eta per factor")
    for tau, ej in zip(taus, etas):
        if not alpha - 1e-12 <= ej < eta:
            raise ValueError("factor cutoffs must lie in [alpha, eta)")
        for beta in tau.terms:
            if float(ctx.hv(beta)) < ej:
                raise ValueError("factor supported below its cutoff")
    prod = taus[0]
    for tau in taus[1:]:
        prod = mul(prod, tau)
    lhs = eval_f(state, ctx, idx, prod, eta)
    rhs = 1.0
    hats = []
    for j, tau in enumerate(taus):
        hat = eta - sum(etas[i] - alpha for i in range(len(taus)) if i != j)
        hats.append(hat)
        rhs *= eval_f(state, ctx, idx, tau, hat)
    defect = abs(lhs - rhs)

    nu_mag = float(np.linalg.norm(state.nu_at(idx)))
    bound = 0.0
    supports = [list(tau.terms) for tau in taus]
    norms = [graded_norm(tau, n0) for tau in taus]
    import itertools
    for combo in itertools.product(*supports):
        total = combo[0]
        for b in combo[1:]:
            total = total + b
        ok = all(etas[j] <= float(ctx.hv(b)) < hats[j]
                 for j, b in enumerate(combo))
        if not ok or float(ctx.hv(total)) < eta:
            continue
        term = n0 ** max(total.angle, 0)
        for j, b in enumerate(combo):
            term *= nu_mag ** b.poly_order
            term *= norms[j].get(ctx.hv(b))
        bound += term
    constant = defect / bound if bound > 0 else (0.0 if defect < 1e-12
                                                 else math.inf)
    return MorphismReport(constant, (idx, tuple(hats)),
                          [{"defect": defect, "bound": bound}])


@dataclass
class InterpolationReport:
    c_u: float
    c_nu_low: float
    c_nu: float

    def max_constant(self) -> float:
        return max(self.c_u, self.c_nu_low, self.c_nu)


def check_interpolation(low: ModellingNorms, high: ModellingNorms,
                        ) -> InterpolationReport:
    """Implied constants of the interpolation inequalities between the
    inhomogeneous modelling quantities at cutoffs kappa < eta:
    I_u(kappa) <= C I_u(eta)^{kappa/eta} I_u^{1-kappa/eta}, the bound of
    I_nu by I_u(eta), and the nu-interpolation at kappa in (1, eta)."""
    kappa, eta = low.eta, high.eta
    if not 0 < kappa <= eta:
        raise ValueError("cutoffs out of order")
    in_u_low = low.h_u + low.i_u
    in_u_high = high.h_u + high.i_u
    c_u = in_u_low / (in_u_high ** (kappa / eta)
                      * low.i_u ** (1 - kappa / eta))
    c_nu_low = low.i_nu / (in_u_high ** (1 / eta)
                           * low.i_u ** (1 - 1 / eta))
    if kappa > 1 and eta > 1:
        in_nu_low = low.h_nu + low.i_nu
        in_nu_high = high.h_nu + high.i_nu
        c_nu = in_nu_low / (in_nu_high ** ((kappa - 1) / (eta - 1))
                            * low.i_nu ** ((eta - kappa) / (eta - 1)))
    else:
        c_nu = 0.0
    return InterpolationReport(c_u, c_nu_low, c_nu)


def three_point_gamma(state: ExpansionState, cx: CenteredModel,
                      cy: CenteredModel,
                      g: Optional[GroupElement] = None) -> np.ndarray:
    """gamma(x, y) = (f_eta(x).Gamma_yx - f_eta(y)) applied to the
    polynomial generator; measures the failure of nu to transform
    exactly under re-expansion."""
    ctx = cx.ctx
    if g is None:
        g = connect(cx, cy)
    from .series import z_x
    out = np.empty(ctx.d)
    for i in range(ctx.d):
        moved = group_apply(g, z_x(ctx, i))
        out[i] = (eval_f(state, ctx, cx.idx, moved)
                  - float(state.nu[i][cy.idx]))
    return out


def check_three_point_identity(state: ExpansionState, cx: CenteredModel,
                               cy: CenteredModel) -> float:
    """Residual of nu(y) - nu(x) - f_eta(x).pi1_yx = -gamma(x, y); the
    two sides evaluate the same data through different code paths."""
    ctx = cx.ctx
    g = connect(cx, cy)
    gam = three_point_gamma(state, cx, cy, g)
    dev = 0.0
    for i in range(ctx.d):
        lhs = (float(state.nu[i][cy.idx]) - float(state.nu[i][cx.idx])
               - eval_f(state, ctx, cx.idx, g.pi1[i]))
        dev = max(dev, abs(lhs + gam[i]))
    return dev
