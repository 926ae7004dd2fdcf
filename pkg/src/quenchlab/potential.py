"""The Hölder potential ``F`` and its smoothed variant ``F_eps``.

For ``gamma > 0`` the smoothing is

    F_eps(s) = l1 * ((s_+^2 + eps^2)^(gamma/2) - eps^gamma)
             + l2 * ((s_-^2 + eps^2)^(gamma/2) - eps^gamma)

which is C^1, vanishes at 0, is monotone on each half-line and tends to ``F``
uniformly.  For ``gamma = 0`` that formula collapses to zero, so the indicator
potential is smoothed as ``l * s^2 / (s^2 + eps^2)`` on each side instead.

All functions accept scalars or arrays and return the same kind.
"""

from __future__ import annotations

import numpy as np

from .params import ProblemParams


def _split(s):
    s = np.asarray(s, dtype=float)
    return s, np.maximum(s, 0.0), np.maximum(-s, 0.0)


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def _side_value(t, gamma, eps):
    """One-sided potential with unit weight; ``t >= 0``."""
    if eps > 0:
        if gamma == 0:
            return t * t / (t * t + eps * eps)
        return (t * t + eps * eps) ** (gamma / 2) - eps**gamma
    if gamma == 0:
        return (t > 0).astype(float)
    return t**gamma


def _side_prime(t, gamma, eps):
    """Derivative of :func:`_side_value` with respect to ``t``; 0 at ``t = 0``."""
    if eps > 0:
        q = t * t + eps * eps
        if gamma == 0:
            return 2.0 * t * eps * eps / (q * q)
        return gamma * t * q ** (gamma / 2 - 1)
    if gamma == 0:
        return np.zeros_like(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = gamma * np.where(t > 0, t, 1.0) ** (gamma - 1)
    return np.where(t > 0, d, 0.0)


def _side_second(t, gamma, eps):
    if eps > 0:
        q = t * t + eps * eps
        if gamma == 0:
            return 2.0 * eps * eps * (eps * eps - 3.0 * t * t) / q**3
        return gamma * q ** (gamma / 2 - 2) * (eps * eps + (gamma - 1) * t * t)
    if gamma == 0:
        return np.zeros_like(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = gamma * (gamma - 1) * np.where(t > 0, t, 1.0) ** (gamma - 2)
    return np.where(t > 0, d, 0.0)


def smoothed_potential(s, params: ProblemParams):
    """``F_eps(s)`` with ``eps = params.pot_reg_eps``; exact ``F`` when eps is 0."""
    s, sp, sm = _split(s)
    g, e = params.gamma, params.pot_reg_eps
    value = params.lambda_plus * _side_value(sp, g, e) + params.lambda_minus * _side_value(sm, g, e)
    return _out(value, s)


def smoothed_potential_prime(s, params: ProblemParams):
    """Derivative of :func:`smoothed_potential`.

    With ``eps = 0`` the value at ``s = 0`` is taken as 0 (for ``gamma = 1``
    this is the midpoint of the rescaled subdifferential).
    """
    s, sp, sm = _split(s)
    g, e = params.gamma, params.pot_reg_eps
    value = params.lambda_plus * _side_prime(sp, g, e) - params.lambda_minus * _side_prime(sm, g, e)
    return _out(value, s)


def smoothed_potential_second(s, params: ProblemParams):
    """Second derivative of :func:`smoothed_potential`.

    ``F_eps`` is only C^1 at 0 when the two weights differ; there the mean of
    the one-sided values is returned.  With eps = 0 the value at 0 is 0.
    """
    s, sp, sm = _split(s)
    g, e = params.gamma, params.pot_reg_eps
    l1, l2 = params.lambda_plus, params.lambda_minus
    value = np.where(
        s > 0,
        l1 * _side_second(sp, g, e),
        np.where(s < 0, l2 * _side_second(sm, g, e), 0.5 * (l1 + l2) * _side_second(sp, g, e)),
    )
    return _out(value, s)
