import numpy as np
import pytest
from scipy.integrate import quad

from quenchlab.core import Grid, ScalarField
from quenchlab.energy import evaluate
from quenchlab.errors import InsufficientResolution, InvalidParameters
from quenchlab.oracles import (
    Barrier,
    admissible,
    admissible_gamma_bound,
    alpha_p_lower,
    barrier_crosscheck,
    barrier_p_laplacian,
    barrier_printed_value,
    exact_one_d,
    holder_growth_check,
    holder_growth_report,
    nondegeneracy_constant,
    profile_constant,
    stated_profile_constant,
)
from quenchlab.params import ProblemParams


def _lattice():
    out = []
    for p in (2.0, 2.5, 3.0, 3.5, 4.0):
        for frac in (0.125, 0.4, 0.7, 0.95):
            gamma = 0.25 + frac * (p / 2 - 0.25)
            out.append((p, gamma))
    return out


# -- explicit profile --------------------------------------------------------

def test_profile_constants_frozen():
    ex = exact_one_d(ProblemParams(2.0, 1.0))
    assert (ex.eta, ex.c_plus, ex.c_minus) == (2.0, 0.5, 0.5)
    ex = exact_one_d(ProblemParams(3.0, 1.0))
    assert ex.eta == 1.5
    assert ex.c_plus == pytest.approx(2 / 3, rel=1e-15)
    ex = exact_one_d(ProblemParams(2.0, 1.0, 1.0, 0.0))
    assert ex.c_minus == 0.0
    assert np.all(ex.evaluate_at(np.linspace(-1, 0, 11)) == 0)


def test_profile_rejects_gamma_zero():
    with pytest.raises(InvalidParameters):
        exact_one_d(ProblemParams(2.0, 0.0))


@pytest.mark.parametrize("p,gamma", _lattice())
def test_el_identity_on_lattice(p, gamma):
    for lam in (0.5, 1.0, 2.0):
        ex = exact_one_d(ProblemParams(p, gamma, lam, 1.0 / lam))
        assert max(ex.el_identity_residuals()) <= 1e-10
        assert ex.eta == p / (p - gamma)
        assert stated_profile_constant(p, gamma, lam) >= lam ** (1 / (p - gamma)) / 2 - 1e-15


def test_stated_constant_only_agrees_at_gamma_one():
    for p in (2.0, 3.0, 4.0):
        assert profile_constant(p, 1.0, 1.7) == pytest.approx(stated_profile_constant(p, 1.0, 1.7), rel=1e-14)
        ex = exact_one_d(ProblemParams(p, 1.0, 1.7, 0.3))
        assert max(ex.stated_identity_residuals()) <= 1e-14
    ex = exact_one_d(ProblemParams(2.0, 0.5))
    assert min(ex.stated_identity_residuals()) > 0.1
    assert profile_constant(2.0, 0.5, 1.0) == pytest.approx(1.125 ** (2 / 3), rel=1e-14)


def test_profile_scale_covariance():
    for p, gamma in _lattice():
        ex = exact_one_d(ProblemParams(p, gamma, 1.3, 0.6))
        t = np.linspace(-1, 1, 41)
        for r in (0.25, 0.5, 2.0, 4.0):
            np.testing.assert_allclose(ex.evaluate_at(r * t) / r**ex.eta, ex.evaluate_at(t), rtol=2e-15, atol=0)


def test_profile_derivative_matches_differences():
    ex = exact_one_d(ProblemParams(3.0, 1.2, 1.0, 2.0))
    t = np.linspace(-0.9, 0.9, 18)  # t = 0 is skipped: u'' blows up there
    fd = (ex.evaluate_at(t + 1e-7) - ex.evaluate_at(t - 1e-7)) / 2e-7
    np.testing.assert_allclose(fd, ex.derivative_at(t), atol=1e-7)


def test_profile_energy_closed_form_vs_quadrature():
    for p, gamma in ((2.0, 1.0), (3.0, 1.0), (2.5, 0.6)):
        prm = ProblemParams(p, gamma, 1.0, 2.0)
        ex = exact_one_d(prm)
        dens = lambda t: abs(ex.derivative_at(t)) ** p / p + (
            prm.lambda_plus * max(ex.evaluate_at(t), 0) ** gamma + prm.lambda_minus * max(-ex.evaluate_at(t), 0) ** gamma)
        ref = quad(dens, -1, 0)[0] + quad(dens, 0, 1)[0]
        assert ex.energy(-1, 1) == pytest.approx(ref, rel=1e-9)


def test_sampled_profile_energy_converges():
    prm = ProblemParams(3.0, 1.0)
    ex = exact_one_d(prm)
    errs = []
    for n in (65, 129, 257, 513):
        g = Grid.square(n, dim=1)
        errs.append(abs(evaluate(ex.sample(g), prm).total - ex.energy(-1, 1)))
    for h, e in zip((2 / 64, 2 / 128, 2 / 256, 2 / 512), errs):
        assert e <= h
    assert all(b < a for a, b in zip(errs, errs[1:]))


# -- barrier -----------------------------------------------------------------

def test_barrier_values_frozen():
    assert barrier_p_laplacian(Barrier((0, 0), 1.0, ProblemParams(2.0, 1.0)), 2) == 4.0
    assert barrier_p_laplacian(Barrier((0,), 1.0, ProblemParams(2.0, 1.0)), 1) == 2.0
    assert barrier_p_laplacian(Barrier((0,), 0.0, ProblemParams(3.0, 1.0)), 2) == 0.0
    assert barrier_printed_value(Barrier((0, 0), 1.0, ProblemParams(2.0, 1.0)), 2) == 8.0


def test_barrier_increasing_in_coefficient():
    for p in (2.0, 2.5, 3.0):
        vals = [barrier_p_laplacian(Barrier((0.0,), c, ProblemParams(p, 1.0)), 2) for c in (0.1, 0.5, 1.0, 2.0)]
        assert all(v > 0 for v in vals)
        assert all(b > a for a, b in zip(vals, vals[1:]))


def test_barrier_crosscheck_flags_printed_formula():
    chk = barrier_crosscheck(Barrier((0.0, 0.0), 1.0, ProblemParams(2.0, 1.0)), Grid.square(33, dim=2))
    assert chk.value == 4.0 and chk.printed_value == 8.0
    assert not chk.printed_matches
    assert chk.fd_max_error <= 1e-10


def test_barrier_exponent():
    assert Barrier((0.0,), 1.0, ProblemParams(3.0, 1.0)).exponent == 1.5


# -- constants ---------------------------------------------------------------

def test_nondegeneracy_constant_frozen():
    assert nondegeneracy_constant(ProblemParams(2.0, 1.0), 2) == pytest.approx(1 / 8, rel=1e-15)
    assert nondegeneracy_constant(ProblemParams(2.0, 1.0), 1) == pytest.approx(1 / 4, rel=1e-15)
    small = [nondegeneracy_constant(ProblemParams(2.5, 1.0, lam, 1.0), 2) for lam in (1e-2, 1e-4, 1e-8)]
    assert all(b < a for a, b in zip(small, small[1:])) and small[-1] < 1e-4
    assert nondegeneracy_constant(ProblemParams(2.5, 1.0, 0.0, 1.0), 2) == 0.0


def test_alpha_bound_frozen():
    assert alpha_p_lower(2.0).alpha_lower == 1.0
    assert alpha_p_lower(3.0).alpha_lower == pytest.approx(0.5744, abs=5e-5)
    assert admissible(3.0, 1.0) is True
    assert admissible(3.0, 1.4) is False
    assert admissible(3.0, 1.5) is False
    assert admissible(3.0, 0.0) is False
    assert admissible_gamma_bound(3.0) == pytest.approx(1.0945, abs=1e-4)


def test_alpha_bound_decreasing_and_in_range():
    ps = np.linspace(2, 50, 200)
    vals = [alpha_p_lower(p).alpha_lower for p in ps]
    assert all(0 < v <= 1 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_alpha_bound_rejects_small_p():
    with pytest.raises(InvalidParameters):
        alpha_p_lower(1.5)


# -- Hoelder growth ----------------------------------------------------------

def test_holder_zero_field():
    g = Grid.square(65, dim=2)
    assert holder_growth_check(ScalarField.zeros(g), 0.25, 0.5, 1.0)


def test_holder_radial_power():
    g = Grid.square(65, dim=2)
    u = ScalarField(g, g.distance_from((0.0, 0.0)) ** 1.5)
    rep = holder_growth_report(u, 0.25, 0.5, 1.0)
    # the pair (x, -x) already gives 3 |x|^(1/2) / (2|x|)^(1/4), so the constant exceeds 1
    assert not rep.hypothesis and rep.held
    A = rep.hypothesis_constant
    # nodal gradients are difference quotients, hence the 1% slack
    assert 0.99 * 3 / 2**0.25 <= A <= 3 / 2**0.25
    rep = holder_growth_report(u, 0.25, 0.5, A)
    assert rep.hypothesis and rep.conclusion and rep.held


def test_holder_rejects_nonzero_slope():
    g = Grid.square(33, dim=2)
    u = ScalarField.from_function(g, lambda x, y: x)
    with pytest.raises(InvalidParameters):
        holder_growth_check(u, 0.25, 0.5, 1.0)


def test_holder_needs_resolution():
    g = Grid.square(9, dim=2)
    with pytest.raises(InsufficientResolution):
        holder_growth_check(ScalarField.zeros(g), 0.25, 0.5, 1.0)
