import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from quenchlab.core import Grid, ScalarField
from quenchlab.errors import EmptyPhase, InsufficientResolution, InvalidParameters, UndefinedFit
from quenchlab.fbanalysis import (
    bump,
    bv_inequality_probe,
    decompose,
    default_thresholds,
    dyadic_radii,
    free_boundary_points,
    gradient_decay_fit,
    growth_fit,
    hessian_l2_estimate,
    nondegeneracy_fit,
    perimeter_estimate,
    small_gradient_measure,
)
from quenchlab.oracles import exact_one_d
from quenchlab.params import ProblemParams
from quenchlab.solver import SolveConfig, regularization_floors, solve

P2 = ProblemParams(2.0, 1.0)


def _profile(n, params=P2):
    g = Grid.square(n, dim=1)
    return exact_one_d(params).sample(g)


# -- decomposition -----------------------------------------------------------

def test_decompose_constant():
    g = Grid.square(9, dim=2)
    pd = decompose(ScalarField(g, np.ones(g.shape)), 0.1, 0.1)
    assert pd.omega_plus.all()
    assert not (pd.omega_minus.any() or pd.zero_set.any() or pd.gamma_plus.any() or pd.gamma_degenerate.any())


def test_decompose_profile_marks_two_cells():
    u = _profile(65)
    tau, sigma = default_thresholds(u.grid, P2)
    pd = decompose(u, tau, sigma)
    mid = 32
    assert np.flatnonzero(pd.gamma_plus).tolist() == [mid]
    assert np.flatnonzero(pd.gamma_minus).tolist() == [mid - 1]
    assert np.flatnonzero(pd.gamma_degenerate).tolist() == [mid - 1, mid]
    assert np.flatnonzero(pd.zero_set).tolist() == [mid]
    assert pd.nearest_degenerate_node((0.3,)) == (0.0,)


def test_decompose_odd_line_band():
    g = Grid.square(33, dim=2)
    u = ScalarField.from_function(g, lambda x, y: x * np.abs(x))
    pd = decompose(u, 1e-6, 1.0)
    assert np.array_equal(np.flatnonzero(pd.zero_set.any(axis=1)), [16])
    assert pd.zero_set[16].all()
    assert pd.omega_plus.sum() == pd.omega_minus.sum()
    assert np.array_equal(pd.omega_plus, pd.omega_minus[::-1])


def test_decompose_rejects_nonpositive_thresholds():
    g = Grid.square(9, dim=1)
    with pytest.raises(InvalidParameters):
        decompose(ScalarField.zeros(g), 0.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 0.5), st.floats(1.01, 4.0))
def test_decompose_monotone_in_tau(seed, tau, factor):
    g = Grid.square(12, dim=2)
    u = ScalarField(g, np.random.default_rng(seed).normal(size=g.shape))
    a, b = decompose(u, tau, 1.0), decompose(u, tau * factor, 1.0)
    assert np.all(a.zero_set <= b.zero_set)
    assert np.all(b.omega_plus <= a.omega_plus) and np.all(b.omega_minus <= a.omega_minus)
    assert np.all(a.omega_plus.astype(int) + a.omega_minus + a.zero_set == 1)


# -- exponent fits -----------------------------------------------------------

def test_dyadic_radii():
    g = Grid.square(1025, dim=1)
    assert dyadic_radii(g, (0.0,)) == [2.0**-k for k in range(1, 8)]
    assert dyadic_radii(g, (0.0,), r_max=0.1) == [2.0**-k for k in range(4, 8)]


def test_growth_fit_exact_profile():
    for prm in (P2, ProblemParams(3.0, 1.0), ProblemParams(2.5, 0.6)):
        ex = exact_one_d(prm)
        fit = growth_fit(_profile(1025, prm), (0.0,), prm.eta)
        assert abs(fit.exponent - prm.eta) <= 1e-8
        assert fit.coefficient == pytest.approx(ex.c_plus, rel=1e-8)
        assert fit.max_residual <= 1e-8


def test_gradient_fit_exact_profile():
    # central differences are exact on the quadratic p = 2 profile
    fit = gradient_decay_fit(_profile(1025), (0.0,))
    assert abs(fit.exponent - 1.0) <= 1e-8
    prm = ProblemParams(3.0, 1.0)
    fit = gradient_decay_fit(_profile(1025, prm), (0.0,))
    assert abs(fit.exponent - (prm.eta - 1)) <= 0.02


def test_fits_scale_invariant():
    prm = ProblemParams(2.5, 0.8, 1.0, 2.0)
    g = Grid.square(129, dim=2)
    u = ScalarField.from_function(g, lambda x, y: x * np.abs(x) ** 0.7 + 0.3 * y**2 * x)
    for fn in (growth_fit, gradient_decay_fit):
        a, b = fn(u, (0.0, 0.0)), fn(u * 3.0, (0.0, 0.0))
        assert abs(a.exponent - b.exponent) <= 1e-10
        assert b.coefficient == pytest.approx(3 * a.coefficient, rel=1e-10)
    for a, b in zip(nondegeneracy_fit(u, (0.0, 0.0)), nondegeneracy_fit(u * 3.0, (0.0, 0.0))):
        assert abs(a.exponent - b.exponent) <= 1e-10
    assert prm.eta > 1


def test_gradient_fit_affine_is_flat():
    g = Grid.square(129, dim=2)
    u = ScalarField.from_function(g, lambda x, y: 0.4 * x - 0.2 * y + 1)
    fit = gradient_decay_fit(u, (0.0, 0.0))
    assert abs(fit.exponent) <= 1e-10


def test_fits_undefined_on_zero():
    g = Grid.square(129, dim=2)
    with pytest.raises(UndefinedFit):
        growth_fit(ScalarField.zeros(g), (0.0, 0.0))
    with pytest.raises(UndefinedFit):
        gradient_decay_fit(ScalarField.zeros(g), (0.0, 0.0))


def test_fits_need_four_radii():
    g = Grid.square(17, dim=1)
    with pytest.raises(InsufficientResolution):
        growth_fit(ScalarField.zeros(g), (0.0,))


def test_nondegeneracy_exact_profile():
    prm = ProblemParams(2.0, 1.0, 1.0, 2.0)
    ex = exact_one_d(prm)
    plus, minus = nondegeneracy_fit(_profile(1025, prm), (0.0,), prm.eta)
    assert plus.coefficient == pytest.approx(ex.c_plus, rel=1e-8)
    assert minus.coefficient == pytest.approx(ex.c_minus, rel=1e-8)
    assert plus.coefficient_floor() == pytest.approx(ex.c_plus, rel=1e-12)


def test_nondegeneracy_one_phase():
    g = Grid.square(257, dim=1)
    u = ScalarField(g, np.maximum(g.mesh()[0], 0.0) ** 2)
    fit = nondegeneracy_fit(u, (0.0,), side="plus")
    assert abs(fit.exponent - 2.0) <= 1e-10
    with pytest.raises(EmptyPhase):
        nondegeneracy_fit(u, (0.0,), side="minus")
    with pytest.raises(EmptyPhase):
        nondegeneracy_fit(u, (0.0,))


def test_nondegeneracy_rescaling_invariant():
    prm = ProblemParams(3.0, 1.0, 1.0, 0.5)
    ex = exact_one_d(prm)
    g = Grid.square(1025, dim=1)
    base = nondegeneracy_fit(ex.sample(g), (0.0,))
    t = g.mesh()[0]
    for r in (0.5, 0.25):
        ur = ScalarField(g, ex.evaluate_at(r * t) / r**prm.eta)
        for a, b in zip(base, nondegeneracy_fit(ur, (0.0,))):
            assert abs(a.exponent - b.exponent) <= 1e-10
            assert b.coefficient == pytest.approx(a.coefficient, rel=1e-10)


def test_fit_rows_and_summary():
    fit = growth_fit(_profile(257), (0.0,), 2.0)
    rows = fit.rows()
    assert [r["radius"] for r in rows] == fit.radii
    assert all(r["scaled_value"] == pytest.approx(0.5) for r in rows)
    assert fit.summary()["exponent"] == fit.exponent


# -- small-gradient band -----------------------------------------------------

def test_small_gradient_profile_near_two():
    t = small_gradient_measure(_profile(2**14 + 1), P2, [1e-1, 1e-2, 1e-3, 1e-4])
    assert all(abs(r - 2) <= 0.05 for r in t.ratios[:3])
    assert t.thresholds == pytest.approx([1e-1, 1e-2, 1e-3, 1e-4])


def test_small_gradient_affine_empty():
    g = Grid.square(65, dim=2)
    u = ScalarField.from_function(g, lambda x, y: 0.6 * x + 0.8 * y)
    t = small_gradient_measure(u, P2, [0.5, 0.05, 0.005, 0.0005])
    assert t.cells == [0, 0, 0, 0] and t.ratios == [0, 0, 0, 0]


def test_small_gradient_reflection():
    prm = ProblemParams(2.5, 0.8, 1.0, 3.0)
    g = Grid.square(65, dim=2)
    u = ScalarField.from_function(g, lambda x, y: x * np.abs(x) + 0.1 * y**3)
    a = small_gradient_measure(u, prm, [1e-1, 1e-2, 1e-3, 1e-4])
    b = small_gradient_measure(-u, prm.mirrored(), [1e-1, 1e-2, 1e-3, 1e-4])
    assert a.ratios == b.ratios


def test_small_gradient_preconditions():
    u = _profile(65)
    with pytest.raises(InvalidParameters):
        small_gradient_measure(u, P2, [1e-3, 1e-2, 1e-1, 1.0])
    with pytest.raises(InvalidParameters):
        small_gradient_measure(u, P2, [1e-1, 1e-2, 1e-3])


# -- Hessian average ---------------------------------------------------------

def test_hessian_profile_is_one():
    u = _profile(257)
    tab = hessian_l2_estimate(u, P2)
    h = u.grid.h
    for r, s in zip(tab.radii, tab.averages):
        # only the kink node at t = 0 deviates
        assert abs(s - 1) <= h / r


def test_hessian_affine_zero():
    g = Grid.square(65, dim=2)
    u = ScalarField.from_function(g, lambda x, y: 2 * x - y)
    assert set(hessian_l2_estimate(u, ProblemParams(3.0, 1.0)).averages) == {0.0}


def test_hessian_power_vs_quadrature():
    prm = ProblemParams(3.0, 1.0)
    g = Grid.square(1025, dim=1)
    u = ScalarField(g, np.abs(g.mesh()[0]) ** 1.5)
    tab = hessian_l2_estimate(u, prm)

    def integrand(x):
        return (1.5 * abs(x) ** 0.5 * 0.75 * abs(x) ** -0.5) ** 2

    for r, s in zip(tab.radii, tab.averages):
        ref = 2 * quad(integrand, 0, r)[0] / (2 * r)
        assert abs(s - ref) <= g.h / r


def test_hessian_radius_checks():
    u = _profile(65)
    with pytest.raises(InsufficientResolution):
        hessian_l2_estimate(u, P2, radii=[u.grid.h])
    with pytest.raises(InsufficientResolution):
        hessian_l2_estimate(u, P2, radii=[1.5])


# -- BV probe ----------------------------------------------------------------

def test_bv_constant_zero():
    g = Grid.square(33, dim=2)
    probe = bv_inequality_probe(ScalarField(g, np.full(g.shape, 0.7)), P2, (0.0, 0.0), 0.5)
    assert probe.lhs == 0.0 and probe.ratio == 0.0 and probe.bump_variation > 0


def test_bv_profile_vs_quadrature():
    c, R = 0.1, 0.5

    def phi(t):
        s = ((t - c) / R) ** 2
        return math.exp(-1 / (1 - s)) if s < 1 else 0.0

    def dphi(t):
        s = ((t - c) / R) ** 2
        return phi(t) * (-2 * (t - c) / R**2) / (1 - s) ** 2 if s < 1 else 0.0

    lhs = quad(lambda t: abs(t) * phi(t), c - R, c + R, points=[0.0])[0]
    var = quad(lambda t: abs(dphi(t)), c - R, c + R, points=[c])[0]
    probe = bv_inequality_probe(_profile(1025), P2, (c,), R)
    assert probe.lhs == pytest.approx(lhs, rel=1e-4)
    assert probe.bump_variation == pytest.approx(var, rel=1e-4)


def test_bv_bump_outside_domain():
    with pytest.raises(InvalidParameters):
        bv_inequality_probe(_profile(65), P2, (0.8,), 0.5)


def test_bump_support():
    g = Grid.square(65, dim=2)
    b = bump(g, (0.0, 0.0), 0.5)
    assert b.values.max() == pytest.approx(math.exp(-1))
    assert np.all(b.values[g.distance_from((0.0, 0.0)) >= 0.5] == 0)


def test_bv_ratio_stable_under_refinement():
    ratios = []
    for n in (33, 65, 129):
        g = Grid.square(n, dim=2)
        data = ScalarField.from_function(g, lambda x, y: x * np.abs(x) / 2 + 0.3 * x * y**2)
        rep = solve(data, regularization_floors(g, P2), SolveConfig(continuation_steps=8))
        ratios.append(bv_inequality_probe(rep.solution, P2, (0.0, 0.0), 0.5).ratio)
    assert max(ratios) / min(ratios) <= 1.2


# -- perimeter ---------------------------------------------------------------

def _pd(u, params=P2):
    return decompose(u, *default_thresholds(u.grid, params))


def test_perimeter_line():
    g = Grid.square(257, dim=2)
    est = perimeter_estimate(_pd(ScalarField.from_function(g, lambda x, y: x * np.abs(x))))
    assert abs(est.dimension - 1) <= 0.1
    assert est.h1_proxy == pytest.approx(1.0, rel=0.15)


def test_perimeter_circle():
    g = Grid.square(257, dim=2)
    R = 0.3
    r = g.distance_from((0.0, 0.0))
    u = ScalarField(g, np.sign(r - R) * np.abs(r - R) ** 2)
    est = perimeter_estimate(_pd(u))
    assert abs(est.dimension - 1) <= 0.1
    assert est.h1_proxy == pytest.approx(2 * math.pi * R, rel=0.15)


def test_perimeter_empty():
    g = Grid.square(65, dim=2)
    est = perimeter_estimate(_pd(ScalarField(g, np.ones(g.shape))))
    assert est.h1_proxy == 0.0 and est.points == 0 and set(est.box_counts) == {0}
    assert len(free_boundary_points(_pd(ScalarField(g, np.ones(g.shape))))) == 0


def test_perimeter_preconditions():
    with pytest.raises(InsufficientResolution):
        perimeter_estimate(_pd(ScalarField(Grid.square(9, dim=2), np.ones((9, 9)))))
    with pytest.raises(InvalidParameters):
        perimeter_estimate(_pd(_profile(65)))
