import numpy as np
import pytest

from quenchlab.core import Grid, ScalarField
from quenchlab.energy import evaluate
from quenchlab.errors import InvalidParameters, NonConvergence, RegularizationRequired
from quenchlab.oracles import exact_one_d
from quenchlab.params import ProblemParams
from quenchlab.solver import SolveConfig, harmonic_extension, p_sweep, regularization_floors, solve


def _odd_data(grid):
    x, y = grid.mesh()
    return ScalarField(grid, 0.5 * x * np.abs(x) + 0.3 * x * y**2 + 0.2 * x**3)


@pytest.fixture(scope="module")
def odd_solve():
    g = Grid.square(33, dim=2)
    prm = regularization_floors(g, ProblemParams(2.5, 1.0))
    return solve(_odd_data(g), prm)


def test_zero_data_gives_zero():
    g = Grid.square(17, dim=2)
    rep = solve(ScalarField.zeros(g), ProblemParams(2.0, 1.0, pot_reg_eps=1e-6))
    assert np.all(rep.solution.values == 0)
    assert rep.final_energy.total == 0
    assert rep.converged


def test_boundary_fidelity_bit_exact(odd_solve):
    g = odd_solve.solution.grid
    b = g.boundary_mask()
    assert np.array_equal(odd_solve.solution.values[b], _odd_data(g).values[b])


def test_history_nonincreasing(odd_solve):
    totals = [e.total for e in odd_solve.energy_history]
    assert len(totals) >= 1
    assert all(b <= a for a, b in zip(totals, totals[1:]))


def test_stage_records(odd_solve):
    st = odd_solve.stages
    assert st[-1].delta == odd_solve.delta_final and st[-1].eps == odd_solve.eps_final
    assert all(s.energy_end <= s.energy_start for s in st)
    rec = odd_solve.to_record()
    assert rec["delta_final"] == odd_solve.params.grad_reg_delta
    assert rec["final_energy"]["total"] == odd_solve.final_energy.total


def test_odd_data_gives_odd_solution(odd_solve):
    v = odd_solve.solution.values
    assert np.max(np.abs(v + v[::-1, :])) <= 1e-8


def test_el_residual_small(odd_solve):
    assert odd_solve.converged
    assert odd_solve.el_residual_sup <= 1e-5


def test_local_minimality_probe(odd_solve, rng):
    u, prm = odd_solve.solution, odd_solve.params
    e0 = evaluate(u, prm).total
    interior = u.grid.interior_mask()
    for k in range(50):
        scale = 10.0 ** rng.uniform(-6, -2)
        pert = np.where(interior, rng.standard_normal(u.grid.shape) * scale, 0.0)
        assert evaluate(u.with_values(u.values + pert), prm).total >= e0


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_one_sign_data_keeps_sign(sign):
    g = Grid.square(25, dim=2)
    x, y = g.mesh()
    data = ScalarField(g, sign * (0.6 + x**2 - 0.5 * y))
    prm = regularization_floors(g, ProblemParams(2.0, 1.0, 1.0, 1.0))
    v = solve(data, prm).solution.values
    assert np.min(sign * v) >= -1e-8


def test_no_positive_phase_without_weight():
    g = Grid.square(25, dim=2)
    x, y = g.mesh()
    data = ScalarField(g, -(0.2 + 0.5 * np.cos(3 * x) ** 2) * (1 + y**2))
    prm = regularization_floors(g, ProblemParams(2.0, 1.0, 1.0, 0.0))
    u = solve(data, prm).solution
    assert np.max(u.values) <= 1e-8
    trunc = u.with_values(np.minimum(u.values, 0.0))
    assert evaluate(trunc, prm).total >= evaluate(u, prm).total - 1e-12


def test_exact_profile_recovery_1d():
    errs = []
    for n in (513, 1025):
        g = Grid.square(n, dim=1)
        prm = regularization_floors(g, ProblemParams(2.0, 1.0))
        ex = exact_one_d(prm)
        rep = solve(ex.sample(g), prm)
        errs.append(np.max(np.abs(rep.solution.values - ex.sample(g).values)))
    assert errs[0] <= 5e-3
    assert errs[0] / errs[1] >= 1.5


def test_gradient_method_agrees_with_metric():
    g = Grid.square(17, dim=1)
    prm = regularization_floors(g, ProblemParams(2.0, 1.0))
    ex = exact_one_d(prm)
    a = solve(ex.sample(g), prm, SolveConfig(method="metric")).solution.values
    b = solve(ex.sample(g), prm, SolveConfig(method="gradient", max_iters=20000, continuation_steps=4)).solution.values
    # plain descent stops on energy stagnation with a residual near 1e-4
    assert np.max(np.abs(a - b)) <= 1e-5


def test_deterministic_and_offset():
    g = Grid.square(17, dim=2)
    prm = regularization_floors(g, ProblemParams(3.0, 1.0))
    data = _odd_data(g)
    a, b = solve(data, prm), solve(data, prm)
    assert np.array_equal(a.solution.values, b.solution.values)
    off = ScalarField(g, np.full(g.shape, 0.05))
    c = solve(data, prm, initial_offset=off)
    assert np.max(np.abs(c.solution.values - a.solution.values)) < 1e-5


def test_strict_nonconvergence_raises():
    g = Grid.square(33, dim=2)
    prm = regularization_floors(g, ProblemParams(3.0, 1.0))
    cfg = SolveConfig(max_iters=1, continuation_steps=1, energy_tol=1e-300, grad_tol=1e-300)
    rep = solve(_odd_data(g), prm, cfg)
    assert not rep.converged
    with pytest.raises(NonConvergence) as info:
        solve(_odd_data(g), prm, cfg, strict=True)
    assert info.value.report is not None


def test_solve_rejects_unregularized_degenerate_problem():
    g = Grid.square(9, dim=1)
    with pytest.raises(RegularizationRequired):
        solve(ScalarField.zeros(g), ProblemParams(3.0, 1.0))


def test_config_validation():
    with pytest.raises(InvalidParameters):
        SolveConfig(max_iters=0)
    with pytest.raises(InvalidParameters):
        SolveConfig(method="newton")
    with pytest.raises(InvalidParameters):
        SolveConfig(shrink=1.5)


def test_harmonic_extension_is_harmonic():
    g = Grid.square(9, dim=2)
    x, y = g.mesh()
    data = ScalarField(g, x * x - y * y + 0.5 * x)
    u = harmonic_extension(data)
    np.testing.assert_allclose(u.values, data.values, atol=1e-12)


def test_floors_scale_with_grid():
    prm = ProblemParams(3.0, 1.0)
    a = regularization_floors(Grid.square(65, dim=1), prm)
    b = regularization_floors(Grid.square(129, dim=1), prm)
    assert a.pot_reg_eps / b.pot_reg_eps == pytest.approx(2**1.5)
    assert a.grad_reg_delta / b.grad_reg_delta == pytest.approx(2**0.5)
    assert regularization_floors(Grid.square(65, dim=1), ProblemParams(2.0, 1.0)).grad_reg_delta == 0


def test_sweep_trivial_cases():
    g = Grid.square(17, dim=2)
    data = _odd_data(g)
    sweep = p_sweep(data, 1.0, (2.0, 2.0, 2.0))
    assert all(r.c0_distance == 0 and r.c1_distance == 0 for r in sweep.table)
    single = p_sweep(data, 1.0, (2.5,))
    direct = solve(data, regularization_floors(g, ProblemParams(2.5, 1.0)))
    assert np.array_equal(single.reports[0].solution.values, direct.solution.values)
    with pytest.raises(InvalidParameters):
        p_sweep(data, 1.0, (1.8,))
