"""Phase decomposition, free-boundary extraction and scale-by-scale measurements.

Every measurement returns a small result object with ``rows()`` (one dict per
radius, scale or epsilon, keyed by the names in ``columns``) and a
``summary()`` record.  Balls are closed: a node belongs to ``B_r(y)`` when
its distance to ``y`` is at most ``r`` up to a relative slack of 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Grid, ScalarField, cell_gradient_norm_sq, gradient, nodal_gradient_norm
from .energy import smoothed_potential
from .errors import EmptyPhase, InsufficientResolution, InvalidParameters, UndefinedFit
from .oracles import profile_constant
from .params import ProblemParams

BALL_SLACK = 1e-12

__all__ = [
    "PhaseDecomposition",
    "default_thresholds",
    "decompose",
    "ExponentFit",
    "dyadic_radii",
    "growth_fit",
    "gradient_decay_fit",
    "nondegeneracy_fit",
    "SmallGradientTable",
    "small_gradient_measure",
    "HessianTable",
    "hessian_l2_estimate",
    "BVProbe",
    "bv_inequality_probe",
    "PerimeterEstimate",
    "free_boundary_points",
    "perimeter_estimate",
]


# -- phases ------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseDecomposition:
    """Node masks for the phases and cell masks for the free boundary.

    Cell masks have the grid's cell shape; cell ``k`` spans nodes ``k`` to
    ``k + 1`` along every axis.
    """

    grid: Grid
    omega_plus: np.ndarray
    omega_minus: np.ndarray
    zero_set: np.ndarray
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    gamma_degenerate: np.ndarray
    tau: float
    sigma: float

    def degenerate_centers(self) -> np.ndarray:
        """Centers of the degenerate free-boundary cells, one row per cell."""
        mesh = self.grid.cell_center_mesh()
        return np.stack([m[self.gamma_degenerate] for m in mesh], axis=1)

    def nearest_degenerate_node(self, target: Sequence[float]) -> tuple:
        """Coordinates of the corner node of a degenerate cell closest to ``target``."""
        centers = self.degenerate_centers()
        if centers.size == 0:
            raise EmptyPhase("no degenerate free-boundary cells")
        nodes = np.zeros(self.grid.shape, dtype=bool)
        for corner in _corners(self.grid.dim):
            nodes[corner] |= self.gamma_degenerate
        nodes &= self.zero_set
        if not nodes.any():
            nodes[:] = False
            for corner in _corners(self.grid.dim):
                nodes[corner] |= self.gamma_degenerate
        dist = np.where(nodes, self.grid.distance_from(target), np.inf)
        idx = np.unravel_index(int(np.argmin(dist)), self.grid.shape)
        return tuple(float(self.grid.coordinates(a)[idx[a]]) for a in range(self.grid.dim))

    def summary(self) -> dict:
        return {
            "tau": self.tau,
            "sigma": self.sigma,
            "omega_plus_nodes": int(self.omega_plus.sum()),
            "omega_minus_nodes": int(self.omega_minus.sum()),
            "zero_set_nodes": int(self.zero_set.sum()),
            "gamma_plus_cells": int(self.gamma_plus.sum()),
            "gamma_minus_cells": int(self.gamma_minus.sum()),
            "gamma_degenerate_cells": int(self.gamma_degenerate.sum()),
        }


def _corners(dim: int):
    """Slices picking each corner node of every cell."""
    out = []
    for bits in range(2**dim):
        out.append(tuple(slice(1, None) if (bits >> a) & 1 else slice(None, -1) for a in range(dim)))
    return out


def default_thresholds(grid: Grid, params: ProblemParams, tau_scale: float = 0.1, sigma_scale: float = 10.0) -> tuple:
    """``tau = tau_scale C h^eta`` and ``sigma = sigma_scale eta C h^(eta - 1)``.

    ``C`` is the larger profile constant: these are the value and slope of the
    homogeneous profile one cell from its free boundary.
    """
    c = max(profile_constant(params.p, params.gamma, lam) for lam in (params.lambda_plus, params.lambda_minus))
    eta, h = params.eta, grid.h
    return tau_scale * c * h**eta, sigma_scale * eta * c * h ** (eta - 1)


def decompose(u: ScalarField, tau: float, sigma: float) -> PhaseDecomposition:
    """Split nodes by ``u > tau``, ``u < -tau``, ``|u| <= tau`` and mark free-boundary cells.

    A cell is in ``gamma_plus`` when its corners contain a node of the
    positive phase and a node outside it (same for ``gamma_minus``).  It is
    degenerate when it is in either and its cell gradient is at most ``sigma``.
    """
    if not (tau > 0 and sigma > 0):
        raise InvalidParameters("tau and sigma must be positive")
    grid = u.grid
    v = u.values
    plus, minus = v > tau, v < -tau
    zero = ~(plus | minus)

    def straddles(mask):
        any_in = np.zeros(grid.cell_shape, dtype=bool)
        any_out = np.zeros(grid.cell_shape, dtype=bool)
        for c in _corners(grid.dim):
            any_in |= mask[c]
            any_out |= ~mask[c]
        return any_in & any_out

    g_plus, g_minus = straddles(plus), straddles(minus)
    slope = np.sqrt(cell_gradient_norm_sq(gradient(u)).values)
    degenerate = (g_plus | g_minus) & (slope <= sigma)
    for arr in (plus, minus, zero, g_plus, g_minus, degenerate):
        arr.setflags(write=False)
    return PhaseDecomposition(grid, plus, minus, zero, g_plus, g_minus, degenerate, float(tau), float(sigma))


# -- exponent fits -----------------------------------------------------------

@dataclass
class ExponentFit:
    """Least-squares line through ``(log r, log value)``; zero values are dropped."""

    quantity: str
    center: tuple
    radii: list
    values: list
    exponent: float
    coefficient: float
    max_residual: float
    exponent_hint: Optional[float] = None

    columns = ("radius", "value", "scaled_value")

    def scaled(self, eta: Optional[float] = None) -> list:
        """``value / r^eta`` per radius (``eta`` defaults to the hint)."""
        e = self.exponent_hint if eta is None else eta
        if e is None:
            raise InvalidParameters("no exponent given for scaling")
        return [v / r**e for r, v in zip(self.radii, self.values)]

    def coefficient_floor(self, eta: Optional[float] = None) -> float:
        return min(self.scaled(eta))

    def rows(self):
        scaled = self.scaled() if self.exponent_hint is not None else [math.nan] * len(self.radii)
        return [{"radius": r, "value": v, "scaled_value": s} for r, v, s in zip(self.radii, self.values, scaled)]

    def summary(self) -> dict:
        return {
            "quantity": self.quantity,
            "center": list(self.center),
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "max_residual": self.max_residual,
            "exponent_hint": self.exponent_hint,
            "radii": len(self.radii),
        }


def _fit(quantity, center, radii, values, hint) -> ExponentFit:
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    if keep.sum() < 2:
        raise UndefinedFit(f"{quantity}: fewer than two nonzero values")
    x, y = np.log(r[keep]), np.log(v[keep])
    a = np.stack([x, np.ones_like(x)], axis=1)
    (slope, icept), *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = float(np.max(np.abs(y - (slope * x + icept))))
    return ExponentFit(quantity, tuple(center), list(map(float, r)), list(map(float, v)), float(slope),
                       float(math.exp(icept)), resid, hint)


def dyadic_radii(grid: Grid, center: Sequence[float], min_cells: float = 4.0, r_max: Optional[float] = None) -> list:
    """Radii ``r0 2^-k`` with ``r0`` the largest power of two not above half the
    distance to the domain edge (or ``r_max``), down to ``min_cells * h``."""
    reach = grid.distance_to_edge(center)
    if reach <= 0:
        raise InsufficientResolution("center lies on or outside the grid boundary")
    top = reach / 2 if r_max is None else min(r_max, reach)
    r = 2.0 ** math.floor(math.log2(top))
    out = []
    while r >= min_cells * grid.h * (1 - BALL_SLACK):
        out.append(r)
        r /= 2
    return out


def _ball(grid: Grid, center, r) -> np.ndarray:
    return grid.distance_from(center) <= r * (1 + BALL_SLACK)


def _check_radii(radii, minimum=4):
    if len(radii) < minimum:
        raise InsufficientResolution(f"need at least {minimum} dyadic radii, only {len(radii)} fit")


def growth_fit(u: ScalarField, center, exponent_hint: Optional[float] = None, *, radii=None) -> ExponentFit:
    """Fit ``sup_{B_r(center)} |u|`` against ``r``."""
    radii = dyadic_radii(u.grid, center) if radii is None else list(radii)
    _check_radii(radii)
    vals = [float(np.max(np.abs(u.values[_ball(u.grid, center, r)]))) for r in radii]
    return _fit("sup|u|", center, radii, vals, exponent_hint)


def gradient_decay_fit(u: ScalarField, center, exponent_hint: Optional[float] = None, *, radii=None) -> ExponentFit:
    """Fit ``sup_{B_r(center)} |Du|`` against ``r``, with central-difference nodal gradients."""
    radii = dyadic_radii(u.grid, center) if radii is None else list(radii)
    _check_radii(radii)
    g = nodal_gradient_norm(u)
    vals = [float(np.max(g[_ball(u.grid, center, r)])) for r in radii]
    return _fit("sup|Du|", center, radii, vals, exponent_hint)


def nondegeneracy_fit(u: ScalarField, center, exponent_hint: Optional[float] = None, *, side: str = "both",
                      radii=None):
    """Fit ``sup_{B_r cap Omega+} u`` and ``sup_{B_r cap Omega-} (-u)`` against ``r``.

    ``side`` selects ``"plus"``, ``"minus"`` or ``"both"`` (a pair).  Raises
    :class:`EmptyPhase` for a requested side whose phase misses every ball.
    """
    if side not in ("plus", "minus", "both"):
        raise InvalidParameters(f"unknown side {side!r}")
    radii = dyadic_radii(u.grid, center) if radii is None else list(radii)
    _check_radii(radii)

    def one(sign, name):
        w = sign * u.values
        vals = []
        for r in radii:
            inside = w[_ball(u.grid, center, r)]
            vals.append(float(max(inside.max(), 0.0)))
        if not any(v > 0 for v in vals):
            raise EmptyPhase(f"the {name} phase does not meet the balls around {tuple(center)}")
        return _fit(f"sup_{name}", center, radii, vals, exponent_hint)

    if side == "plus":
        return one(1.0, "plus")
    if side == "minus":
        return one(-1.0, "minus")
    return one(1.0, "plus"), one(-1.0, "minus")


# -- measure of the small-gradient band ---------------------------------------

@dataclass
class SmallGradientTable:
    eps: list
    thresholds: list
    cells: list
    measures: list
    ratios: list

    columns = ("eps", "threshold", "cells", "measure", "ratio")

    def rows(self):
        return [dict(zip(self.columns, t)) for t in zip(self.eps, self.thresholds, self.cells, self.measures, self.ratios)]

    def spread(self) -> float:
        """``max ratio / min ratio`` over the positive ratios (``inf`` if some vanish)."""
        r = np.asarray(self.ratios)
        if np.all(r == 0):
            return 1.0
        return float(r.max() / r.min()) if r.min() > 0 else math.inf

    def summary(self) -> dict:
        return {"max_ratio": float(max(self.ratios)), "min_ratio": float(min(self.ratios)), "spread": self.spread()}


def small_gradient_measure(u: ScalarField, params: ProblemParams, eps_sequence: Sequence[float]) -> SmallGradientTable:
    """``|{0 < |Du| < eps^(1/(p - gamma))}| / eps`` for each ``eps``, counting cells."""
    eps = [float(e) for e in eps_sequence]
    if len(eps) < 2 or any(not e > 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidParameters("eps_sequence must be positive and strictly decreasing")
    if math.log10(eps[0] / eps[-1]) < 3 - 1e-9:
        raise InvalidParameters("eps_sequence must span at least three decades")
    slope = np.sqrt(cell_gradient_norm_sq(gradient(u)).values)
    vol = u.grid.cell_volume
    k = 1.0 / (params.p - params.gamma)
    table = SmallGradientTable([], [], [], [], [])
    for e in eps:
        thr = e**k
        n = int(np.count_nonzero((slope > 0) & (slope < thr)))
        table.eps.append(e)
        table.thresholds.append(thr)
        table.cells.append(n)
        table.measures.append(n * vol)
        table.ratios.append(n * vol / e)
    return table


# -- Hessian average ---------------------------------------------------------

def _hessian_norm_sq(u: ScalarField) -> np.ndarray:
    """Squared Frobenius norm of the central-difference Hessian, zero on the boundary."""
    v, g = u.values, u.grid
    out = np.zeros(g.shape)
    inner = tuple(slice(1, -1) for _ in range(g.dim))
    if g.dim == 1:
        h = g.spacing[0]
        out[inner] = ((v[2:] - 2 * v[1:-1] + v[:-2]) / h**2) ** 2
        return out
    hx, hy = g.spacing
    uxx = (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / hx**2
    uyy = (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / hy**2
    uxy = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * hx * hy)
    out[inner] = uxx**2 + 2 * uxy**2 + uyy**2
    return out


@dataclass
class HessianTable:
    center: tuple
    radii: list
    averages: list
    nodes: list

    columns = ("radius", "average", "nodes")

    def rows(self):
        return [{"radius": r, "average": a, "nodes": n} for r, a, n in zip(self.radii, self.averages, self.nodes)]

    def summary(self) -> dict:
        return {"center": list(self.center), "max_average": float(max(self.averages)),
                "min_average": float(min(self.averages))}


def hessian_l2_estimate(u: ScalarField, params: ProblemParams, radii=None, center=None) -> HessianTable:
    """``S(r)``: mean over interior nodes of ``B_r`` of ``(|Du|^(p-2) |D^2 u|)^2``.

    ``|Du|`` is regularized by ``params.grad_reg_delta``; without it and for
    ``p < 2`` nodes with vanishing gradient contribute 0.
    """
    grid = u.grid
    center = tuple(center) if center is not None else tuple(0.0 for _ in range(grid.dim))
    radii = dyadic_radii(grid, center, min_cells=2.0) if radii is None else list(radii)
    if not radii:
        raise InsufficientResolution("no radius fits the grid")
    reach = grid.distance_to_edge(center)
    for r in radii:
        if r < 2 * grid.h or r > reach:
            raise InsufficientResolution(f"radius {r:g} is outside [2h, distance to edge]")
    gsq = nodal_gradient_norm(u) ** 2 + params.grad_reg_delta**2
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(gsq > 0, gsq ** ((params.p - 2) / 2), 0.0 if params.p != 2 else 1.0)
    integrand = weight**2 * _hessian_norm_sq(u)
    interior = grid.interior_mask()
    out = HessianTable(center, [], [], [])
    for r in radii:
        sel = _ball(grid, center, r) & interior
        out.radii.append(float(r))
        out.averages.append(float(np.mean(integrand[sel])))
        out.nodes.append(int(sel.sum()))
    return out


# -- BV probe ----------------------------------------------------------------

@dataclass
class BVProbe:
    center: tuple
    radius: float
    lhs: float
    bump_variation: float
    ratio: float

    columns = ("radius", "lhs", "bump_variation", "ratio")

    def rows(self):
        return [{"radius": self.radius, "lhs": self.lhs, "bump_variation": self.bump_variation, "ratio": self.ratio}]

    def summary(self) -> dict:
        return {"center": list(self.center), **self.rows()[0]}


def bump(grid: Grid, center, radius) -> ScalarField:
    """``exp(-1/(1 - |x - c|^2/R^2))`` inside the ball, 0 outside."""
    s = (grid.distance_from(center) / radius) ** 2
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1 - s, 1.0)), 0.0)
    return ScalarField(grid, vals)


def _cell_average(v: np.ndarray, dim: int) -> np.ndarray:
    return sum(v[c] for c in _corners(dim)) / 2**dim


def bv_inequality_probe(u: ScalarField, params: ProblemParams, bump_center, bump_radius) -> BVProbe:
    """Weighted variation ``int |D F(u)| phi`` against ``int |D phi|`` for a smooth bump ``phi``.

    Both integrals are cell sums of the staggered-gradient norm times the
    cell volume; ``phi`` enters the left side through its cell average.
    """
    grid = u.grid
    if not bump_radius > 0 or grid.distance_to_edge(bump_center) < bump_radius:
        raise InvalidParameters("the bump must be supported inside the domain")
    phi = bump(grid, bump_center, bump_radius)
    fu = ScalarField(grid, smoothed_potential(u.values, params))
    vol = grid.cell_volume
    dfu = np.sqrt(cell_gradient_norm_sq(gradient(fu)).values)
    dphi = np.sqrt(cell_gradient_norm_sq(gradient(phi)).values)
    lhs = float(np.sum(dfu * _cell_average(phi.values, grid.dim)) * vol)
    rhs = float(np.sum(dphi) * vol)
    return BVProbe(tuple(float(c) for c in bump_center), float(bump_radius), lhs, rhs, lhs / rhs)


# -- perimeter ---------------------------------------------------------------

def free_boundary_points(pd: PhaseDecomposition) -> np.ndarray:
    """Point sample of ``Gamma+ cup Gamma-``.

    Zero-set nodes with an axis neighbour in a phase, plus midpoints of
    edges joining the two phases directly.
    """
    grid = pd.grid
    mesh = grid.mesh()
    phase = pd.omega_plus | pd.omega_minus
    touch = np.zeros(grid.shape, dtype=bool)
    pts = []
    for a in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a], hi[a] = slice(None, -1), slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        touch[lo] |= pd.zero_set[lo] & phase[hi]
        touch[hi] |= pd.zero_set[hi] & phase[lo]
        jump = (pd.omega_plus[lo] & pd.omega_minus[hi]) | (pd.omega_minus[lo] & pd.omega_plus[hi])
        if jump.any():
            pts.append(np.stack([0.5 * (m[lo] + m[hi])[jump] for m in mesh], axis=1))
    pts.insert(0, np.stack([m[touch] for m in mesh], axis=1))
    return np.concatenate(pts, axis=0) if pts else np.zeros((0, grid.dim))


def _box_count(points: np.ndarray, origin: np.ndarray, s: float) -> int:
    if len(points) == 0:
        return 0
    keys = np.floor((points - origin) / s + 1e-9).astype(np.int64)
    return int(np.unique(keys, axis=0).shape[0])


@dataclass
class PerimeterEstimate:
    scales: list
    box_counts: list
    dimension: float
    h1_proxy: float
    points: int
    radius: float

    columns = ("scale", "box_count", "proxy")

    def rows(self):
        return [{"scale": s, "box_count": b, "proxy": b * s} for s, b in zip(self.scales, self.box_counts)]

    def summary(self) -> dict:
        return {"dimension": self.dimension, "h1_proxy": self.h1_proxy, "points": self.points,
                "radius": self.radius, "scales": len(self.scales)}


def perimeter_estimate(pd: PhaseDecomposition, center=None, radius: float = 0.5, *,
                       min_cells: int = 2, finest: int = 3) -> PerimeterEstimate:
    """Box-counting dimension and an H^1 proxy for the free boundary in the open ball ``B_radius(center)``.

    Scales are ``s = 2^k h`` from ``min_cells * h`` up to ``radius/2``.  Box
    counts are minimized over the offsets ``{0, s/2}`` per axis; the dimension
    is the least-squares slope of ``log N`` against ``log(1/s)`` and the proxy
    is ``N(s) s`` minimized over the ``finest`` smallest scales.
    """
    grid = pd.grid
    if grid.dim != 2:
        raise InvalidParameters("perimeter_estimate works on 2-D decompositions")
    center = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    pts = free_boundary_points(pd)
    if len(pts):
        # open ball: a boundary sample on the sphere would add a spurious box at every scale
        pts = pts[np.sqrt(np.sum((pts - center) ** 2, axis=1)) < radius * (1 - BALL_SLACK)]
    scales = []
    s = grid.h * min_cells
    while s <= radius / 2 * (1 + BALL_SLACK):
        scales.append(s)
        s *= 2
    if len(scales) < 3:
        raise InsufficientResolution(f"only {len(scales)} box scales between {min_cells}h and radius/2")
    origin = np.asarray(grid.origin)
    box = []
    for s in scales:
        offsets = [origin + np.array([ox, oy]) for ox in (0.0, -s / 2) for oy in (0.0, -s / 2)]
        box.append(min(_box_count(pts, o, s) for o in offsets))
    if len(pts) == 0:
        dim_fit, proxy = math.nan, 0.0
    else:
        x = np.log(1.0 / np.asarray(scales))
        y = np.log(np.asarray(box, dtype=float))
        dim_fit = float(np.polyfit(x, y, 1)[0])
        proxy = float(min(n * sc for n, sc in zip(box[:finest], scales[:finest])))
    return PerimeterEstimate(scales, box, dim_fit, proxy, int(len(pts)), float(radius))
