"""The renormalized PDE on the torus and the theorem-level measurements.

The equation d_t u - a(u) Lap u + h(u) = xi is solved time-periodically
by a semi-implicit splitting: the stiff part d_t - a_ref Lap is inverted
spectrally, the remainder (a(u) - a_ref) Lap u - h(u) + xi is explicit,
and the composition is iterated to a fixed point.  The verification
harnesses measure the interior Hoelder bound and the order-eta local
expansion of the solution in terms of the model.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .calculus import (BALL_RADIUS, Mollifier, ParabolicMetric, base_lattice,
                       fit_loglog_slope)
from .fields import NoiseSpec, TorusGrid, sample_noise
from .indices import critical_integers
from .model import (ModelField, RenormVector, build_stationary, center,
                    center_all, estimate_q)
from .modelled import (ExpansionState, Nonlinearity, _chart_distance_field,
                       _f_series_field, counter_term, gubinelli_nu_field)
from .series import Context


class SolverDivergence(RuntimeError):
    pass


def default_eta(alpha) -> float:
    """Largest admissible expansion order: the window is
    (2 - alpha, min(n alpha, 1 + n' alpha)]."""
    alpha = Fraction(alpha)
    n, n_prime, _ = critical_integers(alpha)
    top = min(n * alpha, 1 + n_prime * alpha)
    if not 2 - alpha < top:
        raise ValueError(f"no admissible expansion order for alpha={alpha}")
    return float(top)


@dataclass
class SolverConfig:
    grid: TorusGrid
    lam: float = 0.75
    a_ref: Optional[float] = None
    # sup-norm residual target; the discrete fixed point floors near
    # 3e-7 on coarse grids, so tighter targets stall before reaching it
    tol: float = 1e-6
    max_iters: int = 200
    relax: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if self.a_ref is None:
            # midpoint of the ellipticity interval: unconditionally stable
            # for the implicit half, remainder bounded by the pinch
            self.a_ref = 0.5 * (self.lam + 1.0 / self.lam)
        if not self.lam <= self.a_ref <= 1.0 / self.lam:
            raise ValueError("reference diffusivity outside the "
                             "ellipticity interval")


@dataclass
class SolveResult:
    u: np.ndarray
    residual: float
    iterations: int
    mean_offset: float

    @property
    def converged(self) -> bool:
        return True


def _periodic_inverse(grid: TorusGrid, a_ref: float) -> np.ndarray:
    """Fourier inverse of d_t - a_ref Lap with the kernel modes zeroed."""
    sym = (1j * (grid.frequencies() * np.ones(grid.shape))
           + a_ref * grid.k_squared())
    inv = np.zeros_like(sym)
    mask = sym != 0
    inv[mask] = 1.0 / sym[mask]
    return inv


def solve_renormalized(cfg: SolverConfig, xi: np.ndarray, q: RenormVector,
                       a: Nonlinearity) -> SolveResult:
    """Fixed-point iteration for the time-periodic mean-zero solution of
    d_t u - a(u) Lap u + h(u) = xi - c, with c the spatial-temporal mean
    that the torus forces (the affine record of the heat inversion).

    Raises SolverDivergence if the residual stops decreasing before
    reaching the tolerance, and surfaces ellipticity violations from the
    coefficient evaluation."""
    grid = cfg.grid
    inv = _periodic_inverse(grid, cfg.a_ref)
    k2 = grid.k_squared()
    u = np.zeros(grid.shape)
    prev_res = math.inf
    res = math.inf
    offset = 0.0
    for it in range(1, cfg.max_iters + 1):
        a.check_range(u)
        lap_u = np.real(grid.ifft(-k2 * grid.fft(u)))
        h_u = counter_term(q, a, u)
        rhs = (a(u) - cfg.a_ref) * lap_u - h_u + xi
        offset = float(np.mean(rhs))
        new_hat = grid.fft(rhs) * inv
        new_hat[(0,) * (grid.d + 1)] = 0.0
        u_new = np.real(grid.ifft(new_hat))
        u_next = u + cfg.relax * (u_new - u)
        res = _pde_residual(grid, u_next, xi, q, a)
        if res <= cfg.tol:
            u = u_next
            break
        if res >= prev_res * (1.0 - 1e-12) and it > 3:
            raise SolverDivergence(
                f"residual stalled at {res:.3e} after {it} iterations")
        prev_res = res
        u = u_next
    if res > cfg.tol:
        raise SolverDivergence(
            f"residual {res:.3e} above tolerance after {cfg.max_iters} "
            "iterations")
    if float(np.max(np.abs(u))) > cfg.delta:
        raise SolverDivergence(
            f"solution amplitude {np.max(np.abs(u)):.3e} above the "
            f"smallness threshold {cfg.delta}; lower the noise amplitude")
    return SolveResult(u, res, it, offset)


def _pde_residual(grid: TorusGrid, u: np.ndarray, xi: np.ndarray,
                  q: RenormVector, a: Nonlinearity) -> float:
    """Sup norm of d_t u - a(u) Lap u + h(u) - xi after removing the
    space-time mean (the constant the periodic problem cannot match)."""
    uh = grid.fft(u)
    dt_u = np.real(grid.ifft(1j * (grid.frequencies()
                                   * np.ones(grid.shape)) * uh))
    lap_u = np.real(grid.ifft(-grid.k_squared() * uh))
    r = dt_u - a(u) * lap_u + counter_term(q, a, u) - xi
    r = r - np.mean(r)
    return float(np.max(np.abs(r)))


def verify_holder(u: np.ndarray, grid: TorusGrid, alpha: float, n0: float,
                  sample: Optional[Sequence[Tuple[int, ...]]] = None,
                  max_dist: float = 1.0 / 3.0) -> float:
    """Measured constant of the interior Hoelder bound: sup over sampled
    pairs with 0 < d(y, x) < max_dist of d^{-alpha} |u(y) - u(x)|,
    normalized by (sup|u| + N0)."""
    metric = ParabolicMetric()
    if sample is None:
        sample = base_lattice(grid)
    denom = float(np.max(np.abs(u))) + n0
    best = 0.0
    fam_point = _index_point(grid)
    for idx in sample:
        dist = metric.field(grid, fam_point(idx))
        mask = (dist > 0) & (dist < max_dist)
        if not np.any(mask):
            continue
        ratio = np.abs(u - u[idx])[mask] / dist[mask] ** alpha
        best = max(best, float(np.max(ratio)))
    return best / denom


def _index_point(grid: TorusGrid):
    def point(idx):
        out = [float(grid.times().ravel()[idx[0]])]
        for i in range(grid.d):
            out.append(float(np.ravel(grid.coords(i))[idx[1 + i]]))
        return np.array(out)
    return point


@dataclass
class TheoremReport:
    holder_constant: float
    expansion_exponent: float
    expansion_prefactor: float
    rows: List[Dict] = field(default_factory=list)

    def to_csv(self, path: Optional[str] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["quantity", "key", "value"])
        writer.writerow(["holder_constant", "", self.holder_constant])
        writer.writerow(["expansion_exponent", "", self.expansion_exponent])
        writer.writerow(["expansion_prefactor", "", self.expansion_prefactor])
        for row in self.rows:
            writer.writerow([row.get("quantity", ""), row.get("key", ""),
                             row.get("value", "")])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def verify_expansion(state: ExpansionState, model: ModelField, eta: float,
                     shells: Sequence[float], n0: float,
                     base: Optional[Sequence[Tuple[int, ...]]] = None,
                     ) -> TheoremReport:
    """Decay of the order-eta remainder
    u(y) - u(x) - f_eta(x).Pi_x(y) on dyadic distance shells.

    For each sampled base point the remainder is evaluated over the whole
    grid; shell k collects targets with d(y, x) in [r_k, 2 r_k) and the
    shell statistic is the worst sup over base points.  The fitted
    log-log slope of shell sup versus shell radius estimates the
    expansion order; the prefactor is reported relative to
    (sup|u| + N0)."""
    grid = state.grid
    if base is None:
        base = base_lattice(grid)
    sup_u = float(np.max(np.abs(state.u))) + n0
    shell_sups = [0.0] * len(shells)
    for idx in base:
        cm = center(model, idx)
        x = model.chart_full(idx)
        dist = _chart_distance_field(grid, x)
        resid = np.abs(state.u - state.u[idx]
                       - _f_series_field(state, cm, eta))
        for k, r in enumerate(shells):
            mask = (dist >= r) & (dist < 2.0 * r)
            if np.any(mask):
                shell_sups[k] = max(shell_sups[k],
                                    float(np.max(resid[mask])))
    usable = [(r, s) for r, s in zip(shells, shell_sups) if s > 0]
    if len(usable) >= 2:
        slope = fit_loglog_slope([r for r, _ in usable],
                                 [s for _, s in usable])
    else:
        slope = math.nan
    pref = max((s / (sup_u * r ** slope) for r, s in usable), default=0.0) \
        if usable and np.isfinite(slope) else math.nan
    rows = [{"quantity": "shell_sup", "key": r, "value": s}
            for r, s in zip(shells, shell_sups)]
    return TheoremReport(math.nan, slope, pref, rows)


def theorem_report(ctx: Context, cfg: SolverConfig, spec: NoiseSpec,
                   q: RenormVector, a: Nonlinearity,
                   eta: Optional[float] = None,
                   shells: Optional[Sequence[float]] = None,
                   ) -> Tuple[TheoremReport, SolveResult, ExpansionState]:
    """End-to-end: solve the renormalized equation, attach the model and
    the generalized gradient, and run both theorem-level measurements."""
    grid = cfg.grid
    if eta is None:
        eta = default_eta(ctx.alpha)
    xi = sample_noise(spec, grid)
    result = solve_renormalized(cfg, xi, q, a)
    model = build_stationary(ctx, grid, ctx.index_set, xi, q)
    nu = gubinelli_nu_field(result.u, a, model)
    state = ExpansionState(grid, result.u, nu, a, eta)
    if shells is None:
        lo = max(4.0 * spec.eps, 4.0 * grid.dx)
        shells = [lo * 2.0 ** (0.5 * k) for k in range(12)
                  if lo * 2.0 ** (0.5 * k) <= 0.25 + 1e-12]
    rep = verify_expansion(state, model, eta, shells, spec.n0)
    rep.holder_constant = verify_holder(result.u, grid, float(ctx.alpha),
                                        spec.n0)
    rep.rows.append({"quantity": "solver_residual", "key": "",
                     "value": result.residual})
    return rep, result, state


def renormalization_ablation(ctx: Context, cfg: SolverConfig,
                             specs: Sequence[NoiseSpec], a: Nonlinearity,
                             ensemble: int = 8, n: Optional[int] = None,
                             ) -> List[Dict]:
    """Paired runs along a mollification ladder: the counter-term from
    the ensemble estimate versus no counter-term, reporting the measured
    Hoelder constants and the counter-term size per rung."""
    grid = cfg.grid
    if n is None:
        n, _, _ = critical_integers(ctx.alpha)
    rows = []
    for spec in specs:
        q = estimate_q(ctx, grid, ctx.index_set, spec, ensemble, n)
        xi = sample_noise(spec, grid)
        on = solve_renormalized(cfg, xi, q, a)
        off = solve_renormalized(cfg, xi, RenormVector(), a)
        rows.append({
            "eps": spec.eps,
            "q_max": q.max_abs(),
            "holder_renormalized": verify_holder(on.u, grid,
                                                 float(ctx.alpha), spec.n0),
            "holder_bare": verify_holder(off.u, grid, float(ctx.alpha),
                                         spec.n0),
            "residual_on": on.residual,
            "residual_off": off.residual,
        })
    return rows
