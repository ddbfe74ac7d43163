"""Parabolic metric, mollification, weighted jet norms, and measurement
harnesses for the integration and reconstruction estimates.

Everything here is a measurement, not a proof: the harnesses evaluate
the defining suprema of the estimates on sampled families and report the
smallest constants that make them hold.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .fields import TorusGrid

# Radius of the reference ball for weighted norms; the unit ball of the
# continuum statements does not fit inside the unit periodic cell.
BALL_RADIUS = 0.45


def _wrap(delta: np.ndarray) -> np.ndarray:
    """Minimal-image representative of a coordinate difference."""
    return delta - np.round(delta)


def parabolic_distance(x: np.ndarray, y: np.ndarray) -> float:
    """d(x, y) = sqrt|t - s| + |x - y|, with periodic wrapping."""
    diff = _wrap(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
    return float(np.sqrt(abs(diff[0])) + np.linalg.norm(diff[1:]))


class ParabolicMetric:
    """The anisotropic space-time metric; axis 0 is time."""

    def __call__(self, x, y) -> float:
        return parabolic_distance(np.asarray(x), np.asarray(y))

    def field(self, grid: TorusGrid, x: np.ndarray) -> np.ndarray:
        """d(., x) over the whole grid."""
        t = _wrap(grid.times().reshape([-1] + [1] * grid.d) - x[0])
        out = np.sqrt(np.abs(t)) * np.ones(grid.shape)
        for i in range(grid.d):
            dx = _wrap(grid.coords(i) - x[1 + i])
            out = out + np.abs(dx)
        return out


def _bump(s: np.ndarray) -> np.ndarray:
    """Standard smooth bump on (-1, 1), zero outside."""
    out = np.zeros_like(s, dtype=float)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass
class Mollifier:
    """Symmetric smooth kernel supported in the unit parabolic ball.

    The profile is a product of bumps with half-widths chosen so that
    sqrt(time width) + space width = support_radius; normalized to unit
    continuum mass on a fine quadrature mesh, with the derivative-moment
    integrals recorded as certificates.
    """

    kernel_id: str = "bump"
    d: int = 1
    support_radius: float = 1.0
    quad_points: int = 512
    certificates: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kernel_id != "bump":
            raise ValueError(f"unknown kernel {self.kernel_id!r}")
        r = self.support_radius
        self.time_half_width = (r / 2.0) ** 2
        self.space_half_width = r / (2.0 * self.d)
        self._norm = 1.0
        self._norm = 1.0 / self._quad_integral(lambda v: v)
        self._certify()

    def unscaled(self, t: np.ndarray, xs: Sequence[np.ndarray]) -> np.ndarray:
        """Kernel values; even in t and in each spatial coordinate."""
        out = self._norm * _bump(np.asarray(t, float) / self.time_half_width)
        for x in xs:
            out = out * _bump(np.asarray(x, float) / self.space_half_width)
        return out

    def _quad_mesh(self):
        n = self.quad_points
        t = np.linspace(-self.time_half_width, self.time_half_width, n,
                        endpoint=False)
        x = np.linspace(-self.space_half_width, self.space_half_width, n,
                        endpoint=False)
        cell = (t[1] - t[0]) * (x[1] - x[0]) ** self.d
        grids = np.meshgrid(t, *([x] * self.d), indexing="ij")
        return grids, cell

    def _quad_integral(self, transform: Callable) -> float:
        grids, cell = self._quad_mesh()
        vals = self.unscaled(grids[0], grids[1:])
        return float(np.sum(transform(vals)) * cell)

    def _certify(self):
        grids, cell = self._quad_mesh()
        vals = self.unscaled(grids[0], grids[1:])
        ht = 2 * self.time_half_width / self.quad_points
        hx = 2 * self.space_half_width / self.quad_points
        certs = {"mass": float(np.sum(vals) * cell)}
        certs["abs_dt"] = float(
            np.sum(np.abs(np.gradient(vals, ht, axis=0))) * cell)
        grad = vals
        for k in (1, 2):
            grad = np.gradient(grad, hx, axis=1)
            certs[f"abs_grad{k}"] = float(np.sum(np.abs(grad)) * cell)
        self.certificates = certs

    def sample(self, grid: TorusGrid, lam: float) -> np.ndarray:
        """rho_lambda sampled at wrapped grid offsets, renormalized to
        exact unit discrete mass (the quadrature error of the sampled
        bump is folded into the normalization)."""
        if lam < 2.0 * grid.dx:
            raise ValueError("lambda below the resolvable scale 2 dx")
        t = _wrap(grid.times()).reshape([-1] + [1] * grid.d) / lam ** 2
        xs = [_wrap(grid.coords(i)) / lam for i in range(grid.d)]
        vals = self.unscaled(t * np.ones(grid.shape), xs) / lam ** (grid.d + 2)
        total = vals.sum() * grid.dt * grid.dx ** grid.d
        if total <= 0:
            raise ValueError("kernel unresolvable at this lambda")
        # renormalize so the discrete mass is exactly one
        return vals / total


def convolve(f: np.ndarray, grid: TorusGrid, rho: Mollifier,
             lam: float) -> np.ndarray:
    """Periodic convolution with rho_lambda; exact unit mass, linear,
    commutes with translation (all by the Fourier representation)."""
    kern = rho.sample(grid, lam)
    cell = grid.dt * grid.dx ** grid.d
    fh = np.fft.fftn(f, axes=grid.axes)
    kh = np.fft.fftn(kern, axes=grid.axes)
    if f.ndim > kern.ndim:
        kh = kh.reshape(kh.shape + (1,) * (f.ndim - kern.ndim))
    return np.real(np.fft.ifftn(fh * kh, axes=grid.axes)) * cell


def kernel_moment(rho: Mollifier, lam: float, exponent: float,
                  derivative: str = "none", points: int = 400) -> float:
    """Moment integral of |D rho_lambda| weighted by the parabolic
    distance to the origin raised to `exponent`, on a quadrature mesh
    fitted to the rescaled support (independent of any torus grid)."""
    tw = lam ** 2 * rho.time_half_width
    xw = lam * rho.space_half_width
    t = np.linspace(-tw, tw, points, endpoint=False)
    x = np.linspace(-xw, xw, points, endpoint=False)
    ht, hx = t[1] - t[0], x[1] - x[0]
    grids = np.meshgrid(t, *([x] * rho.d), indexing="ij")
    vals = rho.unscaled(grids[0] / lam ** 2,
                        [g / lam for g in grids[1:]]) / lam ** (rho.d + 2)
    if derivative == "grad":
        acc = np.zeros_like(vals)
        for i in range(rho.d):
            acc = acc + np.gradient(vals, hx, axis=1 + i) ** 2
        vals = np.sqrt(acc)
    elif derivative == "dt":
        vals = np.gradient(vals, ht, axis=0)
    dist = np.sqrt(np.abs(grids[0]))
    for g in grids[1:]:
        dist = dist + np.abs(g)
    cell = ht * hx ** rho.d
    return float(np.sum(np.abs(vals) * dist ** exponent) * cell)


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    lx = np.log(np.asarray(xs, float))
    ly = np.log(np.maximum(np.asarray(ys, float), 1e-300))
    sol = np.polyfit(lx, ly, 1)
    return float(sol[0])


@dataclass
class JetFamily:
    """A family of functions indexed by sampled base points: for each
    base grid index, a grid function of the second argument."""

    grid: TorusGrid
    values: Dict[Tuple[int, ...], np.ndarray]
    ball_radius: float = BALL_RADIUS

    @property
    def base(self) -> List[Tuple[int, ...]]:
        return list(self.values.keys())

    def point(self, idx: Tuple[int, ...]) -> np.ndarray:
        out = [float(self.grid.times()[idx[0]])]
        for i in range(self.grid.d):
            out.append(float(np.ravel(self.grid.coords(i))[idx[1 + i]]))
        return np.array(out)

    def dist_weight(self, idx: Tuple[int, ...]) -> float:
        """dist_x = R - d(x, 0), the distance to the reference ball's
        boundary; base points must lie inside the ball."""
        w = self.ball_radius - parabolic_distance(
            self.point(idx), np.zeros(1 + self.grid.d))
        if w <= 0:
            raise ValueError(f"base point {idx} outside the reference ball")
        return w

    def scaled(self, factor: float) -> "JetFamily":
        return JetFamily(self.grid,
                         {k: factor * v for k, v in self.values.items()},
                         self.ball_radius)


def base_lattice(grid: TorusGrid, per_axis: int = 9,
                 ball_radius: float = BALL_RADIUS) -> List[Tuple[int, ...]]:
    """A coarse sublattice of grid indices inside the reference ball."""
    metric = ParabolicMetric()
    origin = np.zeros(1 + grid.d)
    axes_idx = []
    axes_idx.append(np.linspace(0, grid.nt, per_axis, endpoint=False,
                                dtype=int))
    for _ in range(grid.d):
        axes_idx.append(np.linspace(0, grid.nx, per_axis, endpoint=False,
                                    dtype=int))
    out = []
    fam = JetFamily(grid, {})
    for idx in itertools.product(*axes_idx):
        pt = fam.point(tuple(int(i) for i in idx))
        if metric(pt, origin) < 0.9 * ball_radius:
            out.append(tuple(int(i) for i in idx))
    return out


def _ratio_sup(u: JetFamily, eta: float, exponent: float,
               shrink: float) -> float:
    metric = ParabolicMetric()
    best = 0.0
    for idx, vals in u.values.items():
        w = u.dist_weight(idx)
        dist = metric.field(u.grid, u.point(idx))
        mask = (dist > 0) & (dist < shrink * w)
        if not np.any(mask):
            continue
        ratio = np.abs(vals[mask]) / dist[mask] ** exponent
        best = max(best, w ** eta * float(ratio.max()))
    return best


def weighted_sup(u: JetFamily) -> float:
    """Largest |U(x, y)| over base points and targets in their weighted
    balls."""
    metric = ParabolicMetric()
    best = 0.0
    for idx, vals in u.values.items():
        w = u.dist_weight(idx)
        dist = metric.field(u.grid, u.point(idx))
        mask = dist < w
        if np.any(mask):
            best = max(best, float(np.abs(vals[mask]).max()))
    return best


def weighted_holder(u: JetFamily, eta: float) -> float:
    """Weighted eta-Holder quantity of the jet."""
    if not u.values:
        raise ValueError("empty base-point sample")
    if not 0 < eta < 2:
        raise ValueError("eta must lie in (0, 2)")
    return _ratio_sup(u, eta, eta, 1.0)


def weighted_gubinelli(u: JetFamily, eta: float) -> float:
    """Weighted quantity with exponent eta - 1 on the half ball; used for
    derivative-like jets."""
    if not u.values:
        raise ValueError("empty base-point sample")
    return _ratio_sup(u, eta, eta - 1.0, 0.5)


@dataclass
class HarnessReport:
    quantity: str
    constant: float
    rows: List[Dict] = field(default_factory=list)

    def to_csv(self, path: Optional[str] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["x", "lam", "R", "quantity", "value"])
        for row in self.rows:
            writer.writerow([row.get("x", ""), row.get("lam", ""),
                             row.get("R", ""), row.get("quantity",
                                                       self.quantity),
                             row.get("value", "")])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _sup_affine_inf(resid: np.ndarray, offsets: np.ndarray) -> float:
    """Smallest sup norm of resid - c - nu . offsets over affine (c, nu);
    least squares seeds a Nelder-Mead sup-norm descent."""
    design = np.concatenate([np.ones((offsets.shape[0], 1)), offsets], axis=1)
    seed, *_ = np.linalg.lstsq(design, resid, rcond=None)

    def objective(p):
        return float(np.max(np.abs(resid - design @ p)))

    res = minimize(objective, seed, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
    return min(objective(seed), float(res.fun))


def check_local_splitting(u: JetFamily, rho: Mollifier,
                          lambdas: Sequence[float], radii: Sequence[float],
                          homogeneities: Sequence[float], eta: float,
                          n0: float, window: Tuple[float, float],
                          a_samples: int = 9) -> HarnessReport:
    """Smallest M so that the weighted infimum over a0 and affine parts
    of the heat residual of U_lambda is bounded by
    M sum_kappa R^(eta-kappa) n0 lam^(kappa-2) over the sampled family."""
    grid = u.grid
    metric = ParabolicMetric()
    a_grid = np.linspace(window[0], window[1], a_samples)
    freqs = grid.frequencies() * np.ones(grid.shape)
    k2 = grid.k_squared()
    best = 0.0
    rows = []
    for idx in u.base:
        w = u.dist_weight(idx)
        x = u.point(idx)
        dist = metric.field(grid, x)
        offsets_full = np.stack(
            [_wrap(np.broadcast_to(grid.coords(i), grid.shape) - x[1 + i])
             for i in range(grid.d)], axis=-1)
        for lam in lambdas:
            if lam >= w / 10.0:
                continue
            ul = convolve(u.values[idx], grid, rho, lam)
            ul_hat = np.fft.fftn(ul, axes=grid.axes)
            dt_part = np.real(np.fft.ifftn(1j * freqs * ul_hat,
                                           axes=grid.axes))
            lap_part = np.real(np.fft.ifftn(-k2 * ul_hat, axes=grid.axes))
            for radius in radii:
                if radius >= w / 2.0 or lam > radius / 2.0:
                    continue
                mask = dist < radius
                if np.count_nonzero(mask) < 2 + grid.d:
                    continue
                offs = offsets_full[mask]
                val = math.inf
                for a0 in a_grid:
                    resid = (dt_part - a0 * lap_part)[mask]
                    val = min(val, _sup_affine_inf(resid, offs))
                denom = sum(radius ** (eta - kappa) * n0 * lam ** (kappa - 2)
                            for kappa in homogeneities)
                m_val = w ** eta * val / denom
                rows.append({"x": idx, "lam": lam, "R": radius,
                             "quantity": "local_splitting_M",
                             "value": m_val})
                best = max(best, m_val)
    return HarnessReport("local_splitting_M", best, rows)


def check_three_point(u: JetFamily, gamma: Callable,
                      homogeneities: Sequence[float],
                      eta: float) -> HarnessReport:
    """Smallest M bounding the weighted three-point defect
    |U(x,z) - U(x,y) - U(y,z) - gamma(x,y).(z-y)| by
    M sum_kappa d^kappa(y,x) d^(eta-kappa)(z,y) over sampled triples."""
    metric = ParabolicMetric()
    best = 0.0
    rows = []
    base = u.base
    for ix in base:
        w = u.dist_weight(ix)
        px = u.point(ix)
        for iy in base:
            py = u.point(iy)
            dyx = metric(py, px)
            if iy == ix or dyx >= w / 2.0:
                continue
            g = np.asarray(gamma(ix, iy), dtype=float)
            for iz in base:
                pz = u.point(iz)
                dzy = metric(pz, py)
                if dzy == 0.0 or dzy >= w / 2.0:
                    continue
                lhs = (u.values[ix][iz] - u.values[ix][iy]
                       - u.values[iy][iz]
                       - float(g @ _wrap(pz[1:] - py[1:])))
                denom = sum(dyx ** kappa * dzy ** (eta - kappa)
                            for kappa in homogeneities)
                m_val = w ** eta * abs(lhs) / denom
                rows.append({"x": ix, "lam": "", "R": "",
                             "quantity": "three_point_M", "value": m_val})
                best = max(best, m_val)
    return HarnessReport("three_point_M", best, rows)


def check_reconstruction(ef: np.ndarray, f_at: Callable,
                         targets: Sequence[Tuple[int, ...]],
                         grid: TorusGrid, rho: Mollifier,
                         lambdas: Sequence[float], eta: float,
                         c_declared: float, n0: float) -> HarnessReport:
    """Measures |(EF)_lambda(y) - F_lambda(y, y)| across lambda and
    reports the ratio to c_declared n0 lam^eta plus the fitted log-log
    slope of the worst-case numerator."""
    rows = []
    best_ratio = 0.0
    sups = []
    for lam in lambdas:
        efl = convolve(ef, grid, rho, lam)
        worst = 0.0
        for idx in targets:
            fl = convolve(f_at(idx), grid, rho, lam)
            num = abs(float(efl[idx] - fl[idx]))
            worst = max(worst, num)
            ratio = num / (c_declared * n0 * lam ** eta)
            best_ratio = max(best_ratio, ratio)
            rows.append({"x": idx, "lam": lam, "quantity": "recon_ratio",
                         "value": ratio})
        sups.append(worst)
    slope = fit_loglog_slope(lambdas, sups) if len(lambdas) >= 2 else math.nan
    rows.append({"x": "", "lam": "", "quantity": "recon_slope",
                 "value": slope})
    report = HarnessReport("recon_ratio", best_ratio, rows)
    report.slope = slope
    return report
