"""Blow-up rescalings ``v_r(x) = u(y + r x) / r^eta`` on a fixed reference grid.

Profiles for different ``r`` are resampled onto the same grid of the cube
``[-1, 1]^n`` (129 nodes per axis by default) and compared on the nodes of
the closed unit ball.  For an ``eta``-homogeneous ``u`` all profiles agree, so
the largest consecutive difference measures the lack of homogeneity.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .core import Grid, ScalarField, read_field, write_field
from .errors import InsufficientResolution, InvalidParameters
from .params import ProblemParams
from .reporting import write_csv

REFERENCE_NODES = 129


def reference_grid(dim: int, nodes: int = REFERENCE_NODES) -> Grid:
    return Grid.square(nodes, dim=dim, half_width=1.0)


def _unit_ball(ref: Grid) -> np.ndarray:
    return ref.distance_from(np.zeros(ref.dim)) <= 1.0 + 1e-12


def rescale(
    u: ScalarField,
    center: Sequence[float],
    r: float,
    params: ProblemParams,
    reference: Optional[Grid] = None,
    *,
    min_cells: float = 4.0,
) -> ScalarField:
    """``u(center + r x) / r^eta`` at the reference nodes of the unit ball (0 elsewhere).

    Values come from multilinear interpolation of the nodal field, so they are
    exact wherever ``center + r x`` is a grid node.
    """
    grid = u.grid
    ref = reference_grid(grid.dim) if reference is None else reference
    if ref.dim != grid.dim:
        raise InvalidParameters("reference grid and field differ in dimension")
    if not r > 0:
        raise InvalidParameters("scale must be positive")
    if r < min_cells * grid.h:
        raise InsufficientResolution(f"scale {r:g} is below {min_cells:g} grid cells")
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    if grid.distance_to_edge(center) < r * (1 - 1e-12):
        raise InsufficientResolution(f"the ball of radius {r:g} leaves the grid")
    inside = _unit_ball(ref)
    pts = np.stack([center[a] + r * m[inside] for a, m in enumerate(ref.mesh())], axis=1)
    # clip roundoff so points on the grid boundary stay in range
    for a in range(grid.dim):
        pts[:, a] = np.clip(pts[:, a], grid.origin[a], grid.upper[a])
    interp = RegularGridInterpolator([grid.coordinates(a) for a in range(grid.dim)], u.values, method="linear")
    out = np.zeros(ref.shape)
    out[inside] = interp(pts) / r**params.eta
    return ScalarField(ref, out)


@dataclass
class BlowupSequence:
    center: tuple
    scales: list
    profiles: list
    homogeneity_residuals: list
    eta: float

    columns = ("scale", "next_scale", "residual")

    @property
    def reference(self) -> Grid:
        return self.profiles[0].grid

    def rows(self):
        return [
            {"scale": a, "next_scale": b, "residual": res}
            for a, b, res in zip(self.scales, self.scales[1:], self.homogeneity_residuals)
        ]

    def summary(self) -> dict:
        return {"center": list(self.center), "eta": self.eta, "scales": list(self.scales),
                "homogeneity_defect": homogeneity_defect(self) if len(self.profiles) > 1 else 0.0}


def blowup_sequence(
    u: ScalarField,
    center: Sequence[float],
    scales: Sequence[float],
    params: ProblemParams,
    reference: Optional[Grid] = None,
) -> BlowupSequence:
    """Rescaled profiles for decreasing ``scales`` and their consecutive sup differences."""
    scales = [float(s) for s in scales]
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise InvalidParameters("scales must be strictly decreasing")
    ref = reference_grid(u.grid.dim) if reference is None else reference
    profiles = [rescale(u, center, r, params, ref) for r in scales]
    inside = _unit_ball(ref)
    res = [float(np.max(np.abs(a.values[inside] - b.values[inside]))) for a, b in zip(profiles, profiles[1:])]
    return BlowupSequence(tuple(float(c) for c in center), scales, profiles, res, params.eta)


def homogeneity_defect(seq: BlowupSequence) -> float:
    """Largest consecutive residual of the sequence."""
    if len(seq.profiles) < 2:
        raise InvalidParameters("homogeneity defect needs at least two profiles")
    return float(max(seq.homogeneity_residuals))


def write_blowup(seq: BlowupSequence, directory) -> Path:
    """One field file per profile plus ``residuals.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for k, prof in enumerate(seq.profiles):
        write_field(d / f"profile_{k:02d}.txt", prof)
    write_csv(d / "residuals.csv", BlowupSequence.columns, seq.rows())
    return d


def read_profiles(directory) -> list:
    return [read_field(p) for p in sorted(Path(directory).glob("profile_*.txt"))]
