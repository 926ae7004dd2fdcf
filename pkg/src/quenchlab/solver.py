"""Minimization of the discrete functional with Dirichlet data.

Each continuation stage runs a monotone descent on the regularized energy:
the search direction is the gradient preconditioned by a lagged-diffusivity
metric (edge-weighted graph Laplacian of the current ``|Du|^(p-2)`` plus the
nonnegative part of the potential curvature), and the step is chosen by
Armijo backtracking.  Stages halve ``(delta, eps)`` until the floors in
``ProblemParams`` are reached.

The stored energy history is the one of the final stage, where the objective
is fixed; earlier stages minimize different functionals and only their start
and end energies are kept in the stage records.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    Grid,
    ScalarField,
    dirichlet_energy_and_gradient,
    edge_coefficients,
    nodal_gradient_norm,
    p_laplacian_residual,
    residual_mask,
)
from .energy import EnergyBreakdown, check_differentiable, energy_parts_and_gradient, evaluate
from .errors import InvalidParameters, NonConvergence
from .params import ProblemParams
from .potential import smoothed_potential_second

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    """Iteration budget, tolerances and line-search constants.

    ``max_iters`` is the budget of each continuation stage.  A stage stops once
    the sup-norm of the gradient divided by the nodal quadrature weight drops
    below ``grad_tol`` or an accepted step lowers the energy by less than
    ``energy_tol`` relative to its magnitude.
    """

    max_iters: int = 200
    energy_tol: float = 1e-15
    grad_tol: float = 1e-9
    continuation_steps: int = 16
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    method: str = "metric"
    max_backtracks: int = 60

    def __post_init__(self):
        if self.max_iters < 1 or self.continuation_steps < 1:
            raise InvalidParameters("max_iters and continuation_steps must be positive")
        if not (self.energy_tol > 0 and self.grad_tol > 0):
            raise InvalidParameters("tolerances must be positive")
        if not 0 < self.shrink < 1:
            raise InvalidParameters("shrink factor must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 1:
            raise InvalidParameters("sufficient-decrease constant must lie in (0, 1)")
        if self.method not in ("metric", "gradient"):
            raise InvalidParameters(f"unknown descent method {self.method!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StageRecord:
    delta: float
    eps: float
    iterations: int
    residual: float
    converged: bool
    energy_start: float = math.nan
    energy_end: float = math.nan


@dataclass
class SolveReport:
    solution: ScalarField
    params: ProblemParams
    energy_history: list
    final_energy: EnergyBreakdown
    el_residual_sup: float
    sup_norm: float
    iterations_used: int
    delta_final: float
    eps_final: float
    converged: bool
    stages: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "delta_final": self.delta_final,
            "eps_final": self.eps_final,
            "sup_norm": self.sup_norm,
            "el_residual_sup": self.el_residual_sup,
            "final_energy": self.final_energy.to_dict(),
            "params": self.params.to_dict(),
            "grid": self.solution.grid.to_dict(),
            "stages": [asdict(s) for s in self.stages],
        }


class _Metric:
    """Sparse descent metric restricted to the interior nodes.

    ``assemble`` builds the edge-weighted Laplacian with the lagged
    diffusivities, adds the rank-one ``(p - 2)`` cell terms of the Dirichlet
    Hessian when ``p > 2`` (so the Dirichlet part is exact Newton), and a
    nonnegative potential curvature on the diagonal.  The result is SPD.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        n = grid.size
        flat = np.arange(n).reshape(grid.shape)
        interior = grid.interior_mask().ravel()
        self.interior = np.flatnonzero(interior)
        self.position = np.full(n, -1)
        self.position[self.interior] = np.arange(self.interior.size)
        self.edges = []
        for a in range(grid.dim):
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            lo[a] = slice(None, -1)
            hi[a] = slice(1, None)
            self.edges.append((self.position[flat[tuple(lo)].ravel()], self.position[flat[tuple(hi)].ravel()]))
        if grid.dim == 1:
            corners = [flat[:-1], flat[1:]]
        else:
            corners = [flat[:-1, :-1], flat[1:, :-1], flat[:-1, 1:], flat[1:, 1:]]
        self.corners = [self.position[c.ravel()] for c in corners]

    def _corner_weights(self, diffs):
        """Coefficients of ``sum_e a_e g_e D_e`` on the corners of every cell."""
        h = self.grid.spacing
        if self.grid.dim == 1:
            g = diffs[0] / h[0]
            return [-g, g]
        gx, gy = diffs
        gb, gt = gx[:, :-1] / h[0], gx[:, 1:] / h[0]
        gl, gr = gy[:-1, :] / h[1], gy[1:, :] / h[1]
        return [-0.5 * (gb + gl), 0.5 * (gb - gr), 0.5 * (gl - gt), 0.5 * (gt + gr)]

    def assemble(self, values, params: ProblemParams, weights) -> sp.csc_matrix:
        grid = self.grid
        p, delta = params.p, params.grad_reg_delta
        diffs, coeffs, q = edge_coefficients(values, grid, p, delta)
        m = self.interior.size
        rows, cols, data = [], [], []
        curv = np.maximum(smoothed_potential_second(values, params), 0.0) * weights
        diag = curv.ravel()[self.interior].copy()
        for a, (j0, j1) in enumerate(self.edges):
            c = coeffs[a].ravel() / grid.spacing[a] ** 2
            in0, in1 = j0 >= 0, j1 >= 0
            diag += np.bincount(j0[in0], weights=c[in0], minlength=m)
            diag += np.bincount(j1[in1], weights=c[in1], minlength=m)
            both = in0 & in1
            rows += [j0[both], j1[both]]
            cols += [j1[both], j0[both]]
            data += [-c[both], -c[both]]
        if p > 2:
            s = (grid.cell_volume * (p - 2) * q ** ((p - 4) / 2)).ravel()
            cw = [w.ravel() for w in self._corner_weights(diffs)]
            for ja, wa in zip(self.corners, cw):
                for jb, wb in zip(self.corners, cw):
                    keep = (ja >= 0) & (jb >= 0)
                    rows.append(ja[keep])
                    cols.append(jb[keep])
                    data.append((s * wa * wb)[keep])
        rows.append(np.arange(m))
        cols.append(np.arange(m))
        data.append(diag)
        return sp.csc_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)
        )


def regularization_floors(grid: Grid, params: ProblemParams, scale: float = 1e-2) -> ProblemParams:
    """Return ``params`` with ``(delta, eps)`` tied to the grid scale.

    The floors are ``scale`` times the amplitude and slope that the homogeneous
    profile ``C r^eta`` reaches one cell away from its free boundary, so the
    regularization bands stay below the resolution of the grid and shrink with
    it.  ``delta`` is only needed (and only set) when ``p != 2``.
    """
    if not scale > 0:
        raise InvalidParameters("floor scale must be positive")
    p, gamma = params.p, params.gamma
    eta = p / (p - gamma)
    lam = max(params.lambda_plus, params.lambda_minus)
    c = (p - gamma) / p * (lam * (p - 1) / (p - gamma)) ** (1.0 / (p - gamma))
    h = grid.h
    eps = scale * c * h**eta
    delta = 0.0 if p == 2 else scale * eta * c * h ** (eta - 1)
    return params.with_regularization(delta, eps)


def harmonic_extension(g_boundary: ScalarField) -> ScalarField:
    """Discrete harmonic function with the boundary values of ``g_boundary``."""
    grid = g_boundary.grid
    values = np.where(grid.boundary_mask(), g_boundary.values, 0.0)
    metric = _Metric(grid)
    _, grad = dirichlet_energy_and_gradient(values, grid, 2.0, 0.0)
    laplace = ProblemParams(2.0, 1.0, 0.0, 1.0)
    a = metric.assemble(values, laplace, np.zeros(grid.shape))
    flat = values.ravel().copy()
    flat[metric.interior] = spla.spsolve(a, -grad.ravel()[metric.interior])
    return ScalarField(grid, flat.reshape(grid.shape))


def _stage_schedule(params: ProblemParams, steps: int):
    for k in range(steps):
        factor = 2.0 ** (steps - 1 - k)
        yield params.with_regularization(params.grad_reg_delta * factor, params.pot_reg_eps * factor)


def _residual_sup(grad: np.ndarray, weights: np.ndarray, interior: np.ndarray) -> float:
    return float(np.max(np.abs(grad.ravel()[interior] / weights.ravel()[interior]))) if interior.size else 0.0


def _run_stage(values, grid, params, cfg, metric, weights, history):
    """Descent at fixed regularization.  Mutates ``values`` and ``history``."""
    interior = metric.interior
    parts, grad = energy_parts_and_gradient(values, grid, params, weights)
    history.append(parts)
    step0 = 1.0
    for it in range(1, cfg.max_iters + 1):
        res = _residual_sup(grad, weights, interior)
        if res <= cfg.grad_tol:
            return it - 1, res, True
        g_int = grad.ravel()[interior]
        if cfg.method == "metric":
            a = metric.assemble(values, params, weights)
            d_int = -spla.splu(a).solve(g_int)
            t = 1.0
        else:
            d_int = -g_int / weights.ravel()[interior]
            t = step0
        slope = float(np.dot(g_int, d_int))
        if not slope < 0:
            return it - 1, res, False
        accepted = False
        for _ in range(cfg.max_backtracks):
            trial = values.ravel().copy()
            trial[interior] += t * d_int
            trial = trial.reshape(grid.shape)
            t_parts, t_grad = energy_parts_and_gradient(trial, grid, params, weights)
            if t_parts.total <= parts.total + cfg.sufficient_decrease * t * slope:
                accepted = True
                break
            t *= cfg.shrink
        if not accepted:
            # no admissible step: the iterate is stationary to working precision
            return it - 1, res, res <= cfg.grad_tol
        decrease = parts.total - t_parts.total
        values[...] = trial
        parts, grad = t_parts, t_grad
        history.append(parts)
        if cfg.method == "gradient":
            step0 = min(t / cfg.shrink, 1e12)
        if decrease <= cfg.energy_tol * max(abs(parts.total), 1e-300):
            res = _residual_sup(grad, weights, interior)
            return it, res, True
    res = _residual_sup(grad, weights, interior)
    return cfg.max_iters, res, res <= cfg.grad_tol


def solve(
    g_boundary: ScalarField,
    params: ProblemParams,
    cfg: Optional[SolveConfig] = None,
    *,
    initial_offset: Optional[ScalarField] = None,
    strict: bool = False,
) -> SolveReport:
    """Minimize the discrete functional over fields equal to ``g_boundary`` on the boundary.

    The iteration starts from the discrete harmonic extension of the boundary
    data, plus ``initial_offset`` (interior part only) when given; the result
    is deterministic for fixed inputs.  If the final stage exhausts its budget
    the best iterate is returned with ``converged=False``; ``strict=True``
    raises :class:`NonConvergence` instead.
    """
    cfg = cfg or SolveConfig()
    check_differentiable(params)
    grid = g_boundary.grid
    start = harmonic_extension(g_boundary).values.copy()
    boundary = grid.boundary_mask()
    if initial_offset is not None:
        if initial_offset.grid != grid:
            raise InvalidParameters("initial offset lives on a different grid")
        start[~boundary] += initial_offset.values[~boundary]
    start[boundary] = g_boundary.values[boundary]
    values = start
    weights = grid.node_weights()
    metric = _Metric(grid)
    stages = []
    total_iters = 0
    for k, stage_params in enumerate(_stage_schedule(params, cfg.continuation_steps)):
        history: list = []
        iters, res, ok = _run_stage(values, grid, stage_params, cfg, metric, weights, history)
        total_iters += iters
        stages.append(
            StageRecord(
                stage_params.grad_reg_delta, stage_params.pot_reg_eps, iters, res, ok,
                history[0].total, history[-1].total,
            )
        )
        log.debug("stage %d delta=%g eps=%g iters=%d residual=%.3e", k, stage_params.grad_reg_delta,
                  stage_params.pot_reg_eps, iters, res)
    solution = ScalarField(grid, values)
    converged = stages[-1].converged
    report = SolveReport(
        solution=solution,
        params=params,
        energy_history=history,
        final_energy=evaluate(solution, params),
        el_residual_sup=el_residual_sup(solution, params),
        sup_norm=solution.sup_norm(),
        iterations_used=total_iters,
        delta_final=params.grad_reg_delta,
        eps_final=params.pot_reg_eps,
        converged=converged,
        stages=stages,
    )
    if strict and not converged:
        raise NonConvergence(
            f"final stage stopped at residual {stages[-1].residual:.3e} after {stages[-1].iterations} iterations",
            report,
        )
    return report


def el_residual_sup(u: ScalarField, params: ProblemParams) -> float:
    """Sup of the Euler-Lagrange residual off the regularization bands.

    Only interior nodes with ``|u| >= 2 eps`` and ``|Du| >= 2 delta`` count.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = p_laplacian_residual(u, params).values
    mask = residual_mask(u, params) & (np.abs(u.values) >= 2 * params.pot_reg_eps)
    if params.grad_reg_delta > 0:
        mask &= nodal_gradient_norm(u) >= 2 * params.grad_reg_delta
    return float(np.max(np.abs(res[mask]))) if np.any(mask) else 0.0


@dataclass
class SweepRow:
    p: float
    c0_distance: float
    c1_distance: float


@dataclass
class SweepResult:
    """Reports of a sweep in ``p`` and their distances to the ``p = 2`` solve."""

    reference: SolveReport
    reports: list
    table: list

    def rows(self):
        return [asdict(r) for r in self.table]


def _interior_subgrid(grid: Grid, fraction: float) -> np.ndarray:
    # nodes whose distance to the boundary exceeds `fraction` of the half-extent
    mask = np.ones(grid.shape, dtype=bool)
    for a in range(grid.dim):
        x = grid.coordinates(a)
        lo, hi = x[0], x[-1]
        keep = np.minimum(x - lo, hi - x) >= fraction * (hi - lo) / 2
        shape = [1] * grid.dim
        shape[a] = -1
        mask &= keep.reshape(shape)
    return mask


def _nodal_gradient(values: np.ndarray, grid: Grid) -> np.ndarray:
    if grid.dim == 1:
        return np.gradient(values, grid.spacing[0])[None]
    return np.stack(np.gradient(values, *grid.spacing))


def p_sweep(
    g_boundary: ScalarField,
    gamma: float,
    p_sequence: Sequence[float],
    cfg: Optional[SolveConfig] = None,
    *,
    base: Optional[ProblemParams] = None,
    interior_fraction: float = 0.5,
    floor_scale: float = 1e-2,
) -> SweepResult:
    """Solve for every ``p`` in ``p_sequence`` and compare with the ``p = 2`` solve.

    All solves share ``g_boundary``, the weights in ``base`` and grid-scaled
    regularization floors.  Distances are sup norms of ``u_p - u_2`` and of
    the difference of nodal gradients over the interior subgrid that keeps
    ``interior_fraction`` of the half-extent away from the boundary.
    """
    if any(p < 2 for p in p_sequence):
        raise InvalidParameters("p_sweep expects every p >= 2")
    if not p_sequence:
        raise InvalidParameters("empty p sequence")
    base = base or ProblemParams(2.0, gamma)
    grid = g_boundary.grid

    def run(p):
        params = replace(base, p=float(p), gamma=gamma, grad_reg_delta=0.0, pot_reg_eps=0.0)
        params = regularization_floors(grid, params, floor_scale)
        return solve(g_boundary, params, cfg, strict=True)

    reference = run(2.0)
    mask = _interior_subgrid(grid, interior_fraction)
    du_ref = _nodal_gradient(reference.solution.values, grid)
    reports, table = [], []
    for p in p_sequence:
        rep = reference if p == 2 else run(p)
        diff = rep.solution.values - reference.solution.values
        ddu = _nodal_gradient(rep.solution.values, grid) - du_ref
        c1 = np.sqrt(np.sum(ddu**2, axis=0))
        reports.append(rep)
        table.append(SweepRow(float(p), float(np.max(np.abs(diff[mask]))), float(np.max(c1[mask]))))
    return SweepResult(reference, reports, table)
