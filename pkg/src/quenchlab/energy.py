"""Discrete functional, its smoothed variants and the exact descent gradient."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import Grid, ScalarField, dirichlet_energy_and_gradient
from .errors import RegularizationRequired
from .params import ProblemParams
from .potential import smoothed_potential, smoothed_potential_prime, smoothed_potential_second

__all__ = [
    "EnergyBreakdown",
    "evaluate",
    "descent_gradient",
    "energy_and_gradient",
    "energy_parts_and_gradient",
    "smoothed_potential",
    "smoothed_potential_prime",
    "smoothed_potential_second",
    "check_differentiable",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    potential_plus: float
    potential_minus: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


def _potential_parts(values: np.ndarray, grid: Grid, params: ProblemParams):
    # Trapezoidal (corner) quadrature per cell; keeps the potential local to nodes.
    w = grid.node_weights()
    plus = params.lambda_plus * _one_sided(np.maximum(values, 0.0), params)
    minus = params.lambda_minus * _one_sided(np.maximum(-values, 0.0), params)
    return float(np.sum(w * plus)), float(np.sum(w * minus))


def _one_sided(t, params):
    unit = ProblemParams(params.p, params.gamma, 1.0, 0.0, params.grad_reg_delta, params.pot_reg_eps)
    return smoothed_potential(t, unit)


def evaluate(u: ScalarField, params: ProblemParams) -> EnergyBreakdown:
    """Discrete ``J`` on the grid.

    The Dirichlet term uses cell-averaged squared edge differences (shifted by
    ``delta^p`` so constants cost nothing); the potential uses ``F_eps``, which
    is the exact ``F`` when ``pot_reg_eps == 0``.
    """
    dirichlet, _ = dirichlet_energy_and_gradient(u.values, u.grid, params.p, params.grad_reg_delta)
    plus, minus = _potential_parts(u.values, u.grid, params)
    return EnergyBreakdown(dirichlet, plus, minus, dirichlet + plus + minus)


def check_differentiable(params: ProblemParams) -> None:
    if params.p != 2 and params.grad_reg_delta == 0:
        raise RegularizationRequired(
            f"delta = 0 with p = {params.p} != 2 leaves |Du|^p nonsmooth; set grad_reg_delta > 0"
        )
    if params.gamma < 1 and params.pot_reg_eps == 0:
        raise RegularizationRequired(
            f"eps = 0 with gamma = {params.gamma} < 1 leaves F nonsmooth at 0; set pot_reg_eps > 0"
        )


def energy_parts_and_gradient(values: np.ndarray, grid: Grid, params: ProblemParams, weights=None):
    """:class:`EnergyBreakdown` and the gradient with respect to all nodal values.

    Array-level workhorse for the solver; boundary entries of the gradient are
    not zeroed here.
    """
    if weights is None:
        weights = grid.node_weights()
    e_dir, g_dir = dirichlet_energy_and_gradient(values, grid, params.p, params.grad_reg_delta)
    plus = float(np.sum(weights * params.lambda_plus * _one_sided(np.maximum(values, 0.0), params)))
    minus = float(np.sum(weights * params.lambda_minus * _one_sided(np.maximum(-values, 0.0), params)))
    grad = g_dir + weights * smoothed_potential_prime(values, params)
    return EnergyBreakdown(e_dir, plus, minus, e_dir + plus + minus), grad


def energy_and_gradient(values: np.ndarray, grid: Grid, params: ProblemParams, weights=None):
    """Total regularized energy and its nodal gradient (see :func:`energy_parts_and_gradient`)."""
    parts, grad = energy_parts_and_gradient(values, grid, params, weights)
    return parts.total, grad


def descent_gradient(u: ScalarField, params: ProblemParams) -> ScalarField:
    """Exact gradient of :func:`evaluate` with respect to interior nodal values.

    Dirichlet nodes get 0.  Raises :class:`RegularizationRequired` when the
    discrete energy is not differentiable (``delta = 0`` with ``p != 2`` or
    ``eps = 0`` with ``gamma < 1``).
    """
    check_differentiable(params)
    _, grad = energy_and_gradient(u.values, u.grid, params)
    grad[u.grid.boundary_mask()] = 0.0
    return ScalarField(u.grid, grad)
