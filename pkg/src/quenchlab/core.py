"""Grids, nodal fields and the staggered finite-difference operators.

Nodal values live on a uniform tensor grid.  Gradients live on edge
midpoints (component ``i`` is the forward difference along axis ``i``), and
``|Du|^2`` is formed per cell by averaging the squared edge components that
bound the cell.  The discrete p-Laplacian is the negative nodal derivative of
the resulting cell-wise Dirichlet energy divided by the cell volume, so for
``p = 2`` it is exactly the 3-point / 5-point Laplacian.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateEvaluationWarning, InvalidParameters
from .params import ProblemParams
from .potential import smoothed_potential_prime

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "CellField",
    "ProblemParams",
    "gradient",
    "cell_gradient_norm_sq",
    "dirichlet_energy_and_gradient",
    "p_laplacian",
    "p_laplacian_residual",
    "residual_mask",
    "nodal_gradient_norm",
    "write_field",
    "read_field",
]


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid in one or two dimensions.

    Node ``k`` along axis ``a`` sits at ``origin[a] + k * spacing[a]``.
    """

    shape: tuple
    spacing: tuple
    origin: tuple

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        spacing = tuple(float(h) for h in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        if len(shape) not in (1, 2):
            raise InvalidParameters(f"only 1-D and 2-D grids are supported, got dim={len(shape)}")
        if not len(shape) == len(spacing) == len(origin):
            raise InvalidParameters("shape, spacing and origin must have the same length")
        if min(shape) < 3:
            raise InvalidParameters(f"every axis needs at least 3 nodes, got shape={shape}")
        if not all(h > 0 and math.isfinite(h) for h in spacing):
            raise InvalidParameters(f"spacings must be positive and finite, got {spacing}")
        if not all(math.isfinite(o) for o in origin):
            raise InvalidParameters("origin must be finite")

    @classmethod
    def from_bounds(cls, lower: Sequence[float], upper: Sequence[float], shape: Sequence[int]) -> "Grid":
        lower = tuple(float(v) for v in lower)
        upper = tuple(float(v) for v in upper)
        shape = tuple(int(n) for n in shape)
        if min(shape) < 3:
            raise InvalidParameters(f"every axis needs at least 3 nodes, got shape={shape}")
        spacing = tuple((b - a) / (n - 1) for a, b, n in zip(lower, upper, shape))
        return cls(shape, spacing, lower)

    @classmethod
    def square(cls, n: int, dim: int = 2, half_width: float = 1.0) -> "Grid":
        """``n`` nodes per axis on ``[-half_width, half_width]^dim``."""
        return cls.from_bounds([-half_width] * dim, [half_width] * dim, [n] * dim)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def cell_shape(self) -> tuple:
        return tuple(n - 1 for n in self.shape)

    @property
    def h(self) -> float:
        """Largest spacing; the resolution scale used by the analyses."""
        return max(self.spacing)

    @property
    def upper(self) -> tuple:
        return tuple(self.coordinates(a)[-1] for a in range(self.dim))

    def coordinates(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.arange(self.shape[axis]) * self.spacing[axis]

    def mesh(self) -> list:
        return np.meshgrid(*[self.coordinates(a) for a in range(self.dim)], indexing="ij")

    def cell_center_mesh(self) -> list:
        centers = [self.coordinates(a)[:-1] + 0.5 * self.spacing[a] for a in range(self.dim)]
        return np.meshgrid(*centers, indexing="ij")

    def distance_from(self, point: Sequence[float], *, cells: bool = False) -> np.ndarray:
        """Euclidean distance from ``point`` to every node (or cell center)."""
        point = np.broadcast_to(np.asarray(point, dtype=float), (self.dim,))
        mesh = self.cell_center_mesh() if cells else self.mesh()
        return np.sqrt(sum((x - c) ** 2 for x, c in zip(mesh, point)))

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for a in range(self.dim):
            index = [slice(None)] * self.dim
            index[a] = 0
            mask[tuple(index)] = True
            index[a] = -1
            mask[tuple(index)] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def node_weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights: each cell gives ``vol / 2^dim`` to its corners."""
        w = np.ones(self.shape)
        for a in range(self.dim):
            index = [slice(None)] * self.dim
            for end in (0, -1):
                index[a] = end
                w[tuple(index)] *= 0.5
        return w * self.cell_volume

    def nearest_index(self, point: Sequence[float]) -> tuple:
        point = np.broadcast_to(np.asarray(point, dtype=float), (self.dim,))
        index = []
        for a in range(self.dim):
            k = int(round((point[a] - self.origin[a]) / self.spacing[a]))
            index.append(min(max(k, 0), self.shape[a] - 1))
        return tuple(index)

    def distance_to_edge(self, point: Sequence[float]) -> float:
        """Distance from ``point`` to the nearest face of the bounding box."""
        point = np.broadcast_to(np.asarray(point, dtype=float), (self.dim,))
        upper = self.upper
        return float(min(min(point[a] - self.origin[a], upper[a] - point[a]) for a in range(self.dim)))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "shape": list(self.shape), "spacing": list(self.spacing), "origin": list(self.origin)}


class ScalarField:
    """Nodal values on a :class:`Grid`.  Read-only once constructed."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.array(values, dtype=float)
        if values.size != grid.size:
            raise InvalidParameters(f"expected {grid.size} values for shape {grid.shape}, got {values.size}")
        values = values.reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise InvalidParameters("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    @classmethod
    def from_function(cls, grid: Grid, func) -> "ScalarField":
        return cls(grid, func(*grid.mesh()))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def __mul__(self, factor: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * float(factor))

    __rmul__ = __mul__

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if other.grid != self.grid:
            raise InvalidParameters("fields live on different grids")
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return self + (-other)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self):
        return f"ScalarField(shape={self.grid.shape}, sup={self.sup_norm():.6g})"


@dataclass(frozen=True)
class VectorField:
    """Edge-staggered vector field; component ``i`` is one node shorter along axis ``i``."""

    grid: Grid
    components: tuple

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        if len(comps) != self.grid.dim:
            raise InvalidParameters("need one component per axis")
        for i, c in enumerate(comps):
            expected = tuple(n - 1 if a == i else n for a, n in enumerate(self.grid.shape))
            if c.shape != expected:
                raise InvalidParameters(f"component {i} has shape {c.shape}, expected {expected}")
            c.setflags(write=False)
        object.__setattr__(self, "components", comps)


def gradient(u: ScalarField) -> VectorField:
    """Forward differences on edge midpoints."""
    comps = [np.diff(u.values, axis=a) / u.grid.spacing[a] for a in range(u.grid.dim)]
    return VectorField(u.grid, tuple(comps))


def _pair_mean(arr: np.ndarray, axis: int) -> np.ndarray:
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (arr[tuple(lo)] + arr[tuple(hi)])


def _cell_sq(components, delta: float) -> np.ndarray:
    dim = len(components)
    total = None
    for i, g in enumerate(components):
        sq = g * g
        for j in range(dim):
            if j != i:
                sq = _pair_mean(sq, j)
        total = sq if total is None else total + sq
    return total + delta * delta


@dataclass(frozen=True)
class CellField:
    """Cell-centred values; ``values`` has one entry fewer than the grid per axis."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.cell_shape:
            raise InvalidParameters(f"expected cell shape {self.grid.cell_shape}, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def centers(self) -> list:
        return self.grid.cell_center_mesh()


def cell_gradient_norm_sq(du: VectorField, delta: float = 0.0) -> CellField:
    """Cell-centred ``|Du|^2 + delta^2`` from the squared edge components around each cell."""
    if delta < 0:
        raise InvalidParameters("delta must be nonnegative")
    return CellField(du.grid, _cell_sq(du.components, delta))


def _spread_to_edges(cell_weight: np.ndarray, axis: int) -> np.ndarray:
    """Edge coefficients along ``axis``: each cell hands half its weight to each of its edges."""
    k = cell_weight
    for j in range(k.ndim):
        if j == axis:
            continue
        pad = [(0, 0)] * k.ndim
        pad[j] = (1, 0)
        before = np.pad(k, pad)
        pad[j] = (0, 1)
        after = np.pad(k, pad)
        k = 0.5 * (before + after)
    return k


def edge_coefficients(values: np.ndarray, grid: Grid, p: float, delta: float):
    """Edge differences and the lagged diffusivities ``K_e`` of the Dirichlet term.

    Returns ``(diffs, coeffs, cell_sq)`` where ``diffs[i]`` are the forward
    differences along axis ``i`` and ``coeffs[i]`` the matching edge weights,
    already multiplied by the cell volume.
    """
    diffs = [np.diff(values, axis=a) / grid.spacing[a] for a in range(grid.dim)]
    q = _cell_sq(diffs, delta)
    if p == 2:
        w = np.ones_like(q)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(q > 0, q ** ((p - 2) / 2), 0.0)
    w = w * grid.cell_volume
    coeffs = [_spread_to_edges(w, a) for a in range(grid.dim)]
    return diffs, coeffs, q


def dirichlet_energy_and_gradient(values: np.ndarray, grid: Grid, p: float, delta: float):
    """Cell-wise ``sum vol * ((|Du|^2 + delta^2)^(p/2) - delta^p) / p`` and its nodal gradient.

    Subtracting ``delta^p`` makes the energy vanish on constants for every delta.
    """
    diffs, coeffs, q = edge_coefficients(values, grid, p, delta)
    energy = grid.cell_volume / p * float(np.sum(q ** (p / 2) - delta**p))
    grad = np.zeros(grid.shape)
    for a in range(grid.dim):
        flux = coeffs[a] * diffs[a] / grid.spacing[a]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        grad[tuple(hi)] += flux
        grad[tuple(lo)] -= flux
    return energy, grad


def p_laplacian(u: ScalarField, p: float, delta: float = 0.0) -> ScalarField:
    """Discrete ``div(|Du|^(p-2) Du)`` at interior nodes; boundary entries are 0."""
    _, grad = dirichlet_energy_and_gradient(u.values, u.grid, p, delta)
    out = -grad / u.grid.cell_volume
    out[u.grid.boundary_mask()] = 0.0
    return ScalarField(u.grid, out)


def residual_mask(u: ScalarField, params: ProblemParams) -> np.ndarray:
    """Nodes where the Euler-Lagrange residual is evaluated.

    Interior nodes, minus the nodes with ``|u| <= eps`` when ``gamma = 0``
    (the indicator potential has no derivative there).
    """
    mask = u.grid.interior_mask()
    if params.gamma == 0:
        mask &= np.abs(u.values) > params.pot_reg_eps
    return mask


def p_laplacian_residual(u: ScalarField, params: ProblemParams) -> ScalarField:
    """``Delta_p u - gamma*(l1*u_+^(gamma-1) - l2*u_-^(gamma-1))`` on interior nodes.

    When ``pot_reg_eps > 0`` the right-hand side is the derivative of the
    smoothed potential.  Nodes outside :func:`residual_mask` hold 0.  A
    :class:`DegenerateEvaluationWarning` is issued when ``gamma < 1`` and some
    node has ``|u| < eps`` (the right-hand side is regularized there).
    """
    lap = p_laplacian(u, params.p, params.grad_reg_delta).values
    if params.gamma == 0:
        rhs = np.zeros(u.grid.shape)
    else:
        rhs = smoothed_potential_prime(u.values, params)
    out = lap - rhs
    mask = residual_mask(u, params)
    out[~mask] = 0.0
    if 0 < params.gamma < 1 and params.pot_reg_eps > 0:
        n_bad = int(np.count_nonzero(mask & (np.abs(u.values) < params.pot_reg_eps)))
        if n_bad:
            warnings.warn(
                f"right-hand side regularized at {n_bad} nodes with |u| < eps",
                DegenerateEvaluationWarning,
                stacklevel=2,
            )
    return ScalarField(u.grid, out)


def nodal_gradient_norm(u: ScalarField) -> np.ndarray:
    """``|Du|`` at nodes from central differences (one-sided on the boundary)."""
    parts = np.gradient(u.values, *u.grid.spacing) if u.grid.dim > 1 else [np.gradient(u.values, u.grid.spacing[0])]
    return np.sqrt(sum(g * g for g in parts))


# -- field files -------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field(path, field: ScalarField) -> None:
    """Write the text field format: four header lines then one value per line."""
    g = field.grid
    lines = [
        f"dim {g.dim}",
        "shape " + " ".join(str(n) for n in g.shape),
        "spacing " + " ".join(_fmt(h) for h in g.spacing),
        "origin " + " ".join(_fmt(o) for o in g.origin),
    ]
    lines.extend(_fmt(v) for v in field.values.ravel(order="C"))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path) -> ScalarField:
    text = Path(path).read_text().split("\n")
    header = {}
    for line in text[:4]:
        key, *rest = line.split()
        header[key] = rest
    missing = {"dim", "shape", "spacing", "origin"} - header.keys()
    if missing:
        raise InvalidParameters(f"field file {path} lacks header lines {sorted(missing)}")
    dim = int(header["dim"][0])
    shape = tuple(int(v) for v in header["shape"])
    if len(shape) != dim:
        raise InvalidParameters(f"field file {path}: shape does not match dim")
    grid = Grid(shape, tuple(float(v) for v in header["spacing"]), tuple(float(v) for v in header["origin"]))
    values = np.array([float(v) for v in text[4:] if v.strip()])
    return ScalarField(grid, values)
