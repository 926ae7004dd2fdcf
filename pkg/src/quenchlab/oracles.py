"""Closed-form reference objects with their own consistency checks.

* ``ExactOneD``: the one-dimensional two-phase minimizer
  ``C1 t_+^eta - C2 t_-^eta`` with ``eta = p / (p - gamma)``.
* ``Barrier``: the radial comparison function ``C |x - y|^(p/(p-1))``.
* ``AlphaPBound``: the Baernstein-Kovalev lower bound for the optimal Hoelder
  exponent of gradients of planar p-harmonic functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Grid, ScalarField, p_laplacian
from .errors import InsufficientResolution, InvalidParameters
from .params import ProblemParams

__all__ = [
    "ExactOneD",
    "exact_one_d",
    "profile_constant",
    "stated_profile_constant",
    "Barrier",
    "BarrierCheck",
    "barrier_p_laplacian",
    "barrier_printed_value",
    "barrier_crosscheck",
    "nondegeneracy_constant",
    "AlphaPBound",
    "alpha_p_lower",
    "admissible",
    "admissible_gamma_bound",
    "HolderCheck",
    "holder_growth_report",
    "holder_growth_check",
]


def profile_constant(p: float, gamma: float, lam: float) -> float:
    """Constant ``C`` making ``C t^eta`` solve ``(|u'|^(p-2) u')' = lam gamma u^(gamma-1)`` on ``t > 0``.

    Matching powers of ``t`` gives ``(C eta)^(p-1) (eta-1)(p-1) = lam gamma C^(gamma-1)``,
    so ``C^(p-gamma) = lam (p-gamma) / ((p-1) eta^(p-1))``.  Agrees with
    ``stated_profile_constant`` exactly when ``gamma = 1``.
    """
    eta = p / (p - gamma)
    return (lam * (p - gamma) / ((p - 1) * eta ** (p - 1))) ** (1.0 / (p - gamma))


def stated_profile_constant(p: float, gamma: float, lam: float) -> float:
    """``((p - gamma)/p) * (lam (p - 1)/(p - gamma))^(1/(p - gamma))``.

    Kept for comparison; for ``gamma != 1`` the profile built from it is not a
    critical point of the functional.
    """
    return (p - gamma) / p * (lam * (p - 1) / (p - gamma)) ** (1.0 / (p - gamma))


@dataclass(frozen=True)
class ExactOneD:
    """The explicit one-dimensional two-phase minimizer.

    In two dimensions the profile depends on the first coordinate only; use
    ``sample`` to put it on a grid.
    """

    params: ProblemParams
    eta: float
    c_plus: float
    c_minus: float

    def evaluate_at(self, t):
        t = np.asarray(t, dtype=float)
        out = self.c_plus * np.maximum(t, 0.0) ** self.eta - self.c_minus * np.maximum(-t, 0.0) ** self.eta
        return float(out) if out.ndim == 0 else out

    def derivative_at(self, t):
        t = np.asarray(t, dtype=float)
        e = self.eta
        out = e * (self.c_plus * np.maximum(t, 0.0) ** (e - 1) + self.c_minus * np.maximum(-t, 0.0) ** (e - 1))
        return float(out) if out.ndim == 0 else out

    def sample(self, grid: Grid, shift: float = 0.0) -> ScalarField:
        """Nodal samples of ``u(x_1 - shift)``."""
        t = grid.mesh()[0] - shift
        return ScalarField(grid, self.evaluate_at(t))

    def el_identity_residuals(self) -> tuple:
        """Relative mismatch of ``(C eta)^(p-1) (eta-1)(p-1) = lam gamma C^(gamma-1)`` per phase.

        A phase with zero weight has ``C = 0`` and reports 0.
        """
        return self._identity(lambda c: c)

    def stated_identity_residuals(self) -> tuple:
        """Same with ``(C eta)^(gamma-1)`` on the right; vanishes only for ``gamma = 1``."""
        return self._identity(lambda c: c * self.eta)

    def _identity(self, base) -> tuple:
        p, g = self.params.p, self.params.gamma
        out = []
        for c, lam in ((self.c_plus, self.params.lambda_plus), (self.c_minus, self.params.lambda_minus)):
            if c == 0.0:
                out.append(0.0)
                continue
            lhs = (c * self.eta) ** (p - 1) * (self.eta - 1) * (p - 1)
            rhs = lam * g * base(c) ** (g - 1)
            out.append(abs(lhs - rhs) / abs(rhs))
        return tuple(out)

    def energy(self, a: float, b: float) -> float:
        """Closed-form value of ``int_a^b |u'|^p/p + F(u) dt``."""
        if not a <= b:
            raise InvalidParameters("energy interval needs a <= b")
        p, g, e = self.params.p, self.params.gamma, self.eta
        k = g * e + 1  # |u'|^p and |u|^gamma both scale like |t|^(gamma eta)
        dens_plus = (self.c_plus * e) ** p / p + self.params.lambda_plus * self.c_plus**g
        dens_minus = (self.c_minus * e) ** p / p + self.params.lambda_minus * self.c_minus**g

        def prim(t):
            if t >= 0:
                return dens_plus * t**k / k
            return -dens_minus * (-t) ** k / k

        return prim(b) - prim(a)


def exact_one_d(params: ProblemParams) -> ExactOneD:
    """Build the explicit profile for ``params`` (regularization is ignored)."""
    p, g = params.p, params.gamma
    if not 0 < g <= p / 2:
        raise InvalidParameters(f"the explicit profile needs 0 < gamma <= p/2, got gamma={g}")
    return ExactOneD(
        params=params,
        eta=p / (p - g),
        c_plus=profile_constant(p, g, params.lambda_plus),
        c_minus=profile_constant(p, g, params.lambda_minus),
    )


@dataclass(frozen=True)
class Barrier:
    """``w(x) = coefficient * |x - center|^(p/(p-1))``."""

    center: tuple
    coefficient: float
    params: ProblemParams

    def __post_init__(self):
        if not self.coefficient >= 0:
            raise InvalidParameters("barrier coefficient must be nonnegative")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def exponent(self) -> float:
        return self.params.p / (self.params.p - 1)

    def sample(self, grid: Grid) -> ScalarField:
        return ScalarField(grid, self.coefficient * grid.distance_from(self.center) ** self.exponent)


def barrier_p_laplacian(b: Barrier, dim: int) -> float:
    """Exact constant value of ``Delta_p w``: ``C^(p-1) n (p/(p-1))^(p-1)``."""
    if dim < 1:
        raise InvalidParameters("dimension must be at least 1")
    p = b.params.p
    return b.coefficient ** (p - 1) * dim * (p / (p - 1)) ** (p - 1)


def barrier_printed_value(b: Barrier, dim: int) -> float:
    """The same constant with exponent ``p`` on ``p/(p-1)``; kept so reports can flag the mismatch."""
    p = b.params.p
    return b.coefficient ** (p - 1) * dim * (p / (p - 1)) ** p


@dataclass
class BarrierCheck:
    value: float
    printed_value: float
    printed_matches: bool
    fd_max_error: float
    fd_nodes: int
    exclude_radius: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def barrier_crosscheck(b: Barrier, grid: Grid, exclude_radius: float = 0.25) -> BarrierCheck:
    """Compare the constant with the discrete p-Laplacian of the sampled barrier.

    Nodes within ``exclude_radius`` of the center are skipped: for ``p != 2``
    the barrier is not C^2 there and the difference quotient has an O(1)
    error at the center.
    """
    w = b.sample(grid)
    lap = p_laplacian(w, b.params.p, 0.0).values
    mask = grid.interior_mask() & (grid.distance_from(b.center) >= exclude_radius)
    value = barrier_p_laplacian(b, grid.dim)
    printed = barrier_printed_value(b, grid.dim)
    err = float(np.max(np.abs(lap[mask] - value))) if np.any(mask) else math.nan
    return BarrierCheck(
        value=value,
        printed_value=printed,
        printed_matches=math.isclose(value, printed, rel_tol=1e-12, abs_tol=1e-300),
        fd_max_error=err,
        fd_nodes=int(np.count_nonzero(mask)),
        exclude_radius=exclude_radius,
    )


def nondegeneracy_constant(params: ProblemParams, dim: int) -> float:
    """Lower-bound constant ``(lam+ gamma (p-1)/(n p))^(1/(p-1)) (p - gamma)/p``."""
    p, g = params.p, params.gamma
    if not g > 0:
        raise InvalidParameters("the non-degeneracy constant needs gamma > 0")
    if dim < 1:
        raise InvalidParameters("dimension must be at least 1")
    return (params.lambda_plus * g * (p - 1) / (dim * p)) ** (1.0 / (p - 1)) * (p - g) / p


@dataclass(frozen=True)
class AlphaPBound:
    p: float
    alpha_lower: float

    def to_dict(self) -> dict:
        return {"p": self.p, "alpha_lower": self.alpha_lower}


def alpha_p_lower(p: float) -> AlphaPBound:
    """Baernstein-Kovalev lower bound for the planar gradient Hoelder exponent."""
    if not p >= 2:
        raise InvalidParameters(f"the bound is stated for p >= 2, got p={p}")
    m = 1.0 / (p - 1)
    alpha = (-3.0 - m + math.sqrt(33.0 + 30.0 * m + m * m)) / (2.0 * p)
    return AlphaPBound(float(p), alpha)


def admissible(p: float, gamma: float) -> bool:
    """True when ``p/(p - gamma) < 1 + alpha_p`` and ``0 < gamma < p/2``."""
    if not 0 < gamma < p / 2:
        return False
    return p / (p - gamma) < 1.0 + alpha_p_lower(p).alpha_lower


def admissible_gamma_bound(p: float) -> float:
    """Supremum of admissible ``gamma``: ``min(p (1 - 1/(1 + alpha)), p/2)``."""
    a = alpha_p_lower(p).alpha_lower
    return min(p * (1.0 - 1.0 / (1.0 + a)), p / 2)


@dataclass
class HolderCheck:
    radii: list
    seminorms: list
    hypothesis_constant: float
    hypothesis: bool
    conclusion: Optional[bool]
    worst_ratio: float = math.nan
    notes: list = field(default_factory=list)

    @property
    def held(self) -> bool:
        return (not self.hypothesis) or bool(self.conclusion)


def _nodal_gradient(u: ScalarField) -> np.ndarray:
    g = u.grid
    if g.dim == 1:
        return np.gradient(u.values, g.spacing[0])[None]
    return np.stack(np.gradient(u.values, *g.spacing))


def holder_growth_report(
    u: ScalarField,
    alpha: float,
    beta: float,
    A: float,
    center: Optional[Sequence[float]] = None,
    *,
    min_radius_cells: float = 2.0,
    grad_tol: Optional[float] = None,
) -> HolderCheck:
    """Test the implication "small scaled seminorms => ``|u| <= A |x|^(1+beta)``".

    For dyadic radii ``r < 1/2`` the seminorm ``[Du]_{C^alpha(B_r)}`` is the
    maximum over all node pairs in the closed ball.  The hypothesis is
    ``max_r r^(alpha - beta) [Du]_r <= A``; when it holds the conclusion is
    checked at every node with ``|x| < 1/2``.  ``u(center)`` must vanish and
    ``|Du(center)|`` must be below ``grad_tol`` (default ``A h^beta``).
    """
    if not beta > alpha:
        raise InvalidParameters("the growth check needs beta > alpha")
    if not 0 < alpha <= 1:
        raise InvalidParameters("alpha must lie in (0, 1]")
    grid = u.grid
    center = tuple(center) if center is not None else tuple(0.0 for _ in range(grid.dim))
    idx = grid.nearest_index(center)
    du = _nodal_gradient(u)
    h = grid.h
    tol = A * h**beta if grad_tol is None else grad_tol
    u0 = float(u.values[idx])
    g0 = float(np.sqrt(np.sum(du[(slice(None),) + idx] ** 2)))
    if abs(u0) > tol * h or g0 > tol:
        raise InvalidParameters(
            f"growth check needs u(center) = 0 and Du(center) = 0, got u={u0:.3g}, |Du|={g0:.3g}"
        )
    reach = min(grid.distance_to_edge(center), 0.5)
    radii = []
    r = 0.25
    while r > reach:
        r /= 2
    while r >= min_radius_cells * h:
        radii.append(r)
        r /= 2
    if len(radii) < 3:
        raise InsufficientResolution(f"only {len(radii)} dyadic radii fit in the grid")
    dist = grid.distance_from(center)
    flat_du = du.reshape(grid.dim, -1).T
    pts = np.stack([m.ravel() for m in grid.mesh()], axis=1)
    seminorms = []
    for r in radii:
        sel = np.flatnonzero(dist.ravel() <= r)
        x, g = pts[sel], flat_du[sel]
        best = 0.0
        for k in range(len(sel) - 1):
            dx = np.sqrt(np.sum((x[k + 1 :] - x[k]) ** 2, axis=1))
            dg = np.sqrt(np.sum((g[k + 1 :] - g[k]) ** 2, axis=1))
            best = max(best, float(np.max(dg / dx**alpha)))
        seminorms.append(best)
    scaled = [r ** (alpha - beta) * s for r, s in zip(radii, seminorms)]
    const = max(scaled)
    hypothesis = const <= A
    conclusion = None
    worst = math.nan
    if hypothesis:
        near = (dist < 0.5) & (dist > 0)
        bound = A * dist[near] ** (1 + beta)
        vals = np.abs(u.values[near])
        worst = float(np.max(vals / bound)) if vals.size else 0.0
        conclusion = bool(np.all(vals <= bound))
    return HolderCheck(radii, seminorms, const, hypothesis, conclusion, worst)


def holder_growth_check(u: ScalarField, alpha: float, beta: float, A: float, center=None) -> bool:
    """Whether the Hoelder-growth implication held on the grid."""
    return holder_growth_report(u, alpha, beta, A, center).held
