import numpy as np
import pytest

from tspmp.calculus import GridFunction
from tspmp.certificate import certify
from tspmp.dynamics import simulate
from tspmp.errors import NoAdmissibleControl, NoConvergence, TooLarge, UnsupportedKind
from tspmp.geometry import Box, Singleton
from tspmp.problem import ControlProblem
from tspmp.registry import get_problem, lqr_closed_form, lqr_optimal_cost, shooting_guess
from tspmp.solver import (
    ShootingGuess, ShootingOptions, brute_force_discrete, control_gradient, projected_gradient, shooting_defect,
    shooting_solve,
)
from tspmp.timescale import integer_timescale

GRID11 = np.linspace(0, 1, 11)


def test_brute_force_ex0():
    res = brute_force_discrete(get_problem("ex0"), GRID11)
    assert res.u[:, 0].tolist() == [0.0, 1.0] and res.cost == -1.0


def test_brute_force_ex000_tie_break():
    res = brute_force_discrete(get_problem("ex000"), GRID11)
    assert res.u[:, 0].tolist() == [0.0, 0.0] and res.cost == pytest.approx(-0.5)
    p = get_problem("ex000")
    for u0 in GRID11:
        c = simulate(p, GridFunction([0, 1, 2], [u0, 0.0, 0.0])).cost
        assert c == pytest.approx(-0.5, abs=1e-15)


def test_brute_force_ex00_minimal_time():
    res = brute_force_discrete(get_problem("ex00"), GRID11, b_candidates=[3, 1, 2])
    assert res.b == 2.0 and res.cost == 2.0
    assert res.per_b == {1.0: None, 2.0: 2.0, 3.0: 3.0}
    u = res.control(get_problem("ex00"))
    assert u.values[:2, 0].sum() == pytest.approx(1.5)


def test_brute_force_per_step_sets():
    res = brute_force_discrete(get_problem("ex0"), [[0.0, 0.5], [0.25, 1.0]])
    assert res.u[:, 0].tolist() == [0.0, 1.0]


def test_brute_force_limits():
    p = get_problem("ex00")
    with pytest.raises(TooLarge):
        brute_force_discrete(p, np.linspace(0, 1, 101), b_candidates=[3])
    with pytest.raises(NoAdmissibleControl):
        brute_force_discrete(p, GRID11, b_candidates=[1])
    with pytest.raises(UnsupportedKind):
        brute_force_discrete(get_problem("lqr1d"), GRID11)
    long = ControlProblem(integer_timescale(0, 20), 1, 1, ["u0"], "1", ["qa0"], Singleton([0.0]), Box([0], [1]), 20.0, q_a=[0.0])
    with pytest.raises(TooLarge):
        brute_force_discrete(long, [0.0, 1.0])


def test_shooting_ex0_recovers_multipliers():
    p = get_problem("ex0")
    res = shooting_solve(p, shooting_guess("ex0"), ShootingOptions(h=1.0))
    ext = res.extremal
    assert ext.p0 == -1.0 and ext.psi.tolist() == [0.0]
    assert ext.trajectory.u.values[:2, 0].tolist() == [0.0, 1.0]
    assert res.defect == 0.0
    guess = shooting_guess("ex0")
    F = shooting_defect(p, np.concatenate([[0.0], [0.0], [0.0]]), 1.0, guess.u_hint)
    assert np.all(F == 0)


def test_shooting_lqr_matches_riccati():
    p = get_problem("lqr1d")
    res = shooting_solve(p, shooting_guess("lqr1d"), ShootingOptions(h=1e-2))
    ext = res.extremal
    q, pp = lqr_closed_form(ext.grid)
    scale = -1.0 / ext.p0
    assert np.max(np.abs(ext.trajectory.q.values[:, 0] - q)) <= 1e-5
    assert np.max(np.abs(scale * ext.p.values[:, 0] - pp)) <= 1e-5
    assert ext.trajectory.cost == pytest.approx(lqr_optimal_cost(), abs=1e-6)
    assert np.isfinite(res.jacobian_cond)


def test_shooting_unreachable_target():
    p = ControlProblem(integer_timescale(0, 2), 1, 1, ["u0"], "u0**2", ["qa0", "qb0"], Singleton([0.0, 5.0]),
                       Box([0], [1]), 2.0, q_a=[0.0])
    with pytest.raises(NoConvergence) as info:
        shooting_solve(p, ShootingGuess(q_a=[0.0]), ShootingOptions(h=1.0, max_iter=20))
    hist = info.value.defect_history
    assert min(hist) > 1.0


def test_shooting_output_certifies():
    p = get_problem("hybrid_demo")
    ext = shooting_solve(p, shooting_guess("hybrid_demo"), ShootingOptions(h=1e-2)).extremal
    rep = certify(p, ext, tol_pmp=1e-5)
    assert rep.exit_code == 0


def test_gradient_at_rs_is_hamiltonian_slope():
    p = get_problem("ex0")
    tr = simulate(p, GridFunction([0, 1, 2], [0.5, 0.5, 0.5]))
    G = control_gradient(p, tr)
    # exact derivative of the cost u0² - u1² (q(2) does not enter)
    assert G[:2, 0].tolist() == pytest.approx([-1.0, 1.0])


def test_projected_gradient_ex0():
    p = get_problem("ex0")
    u, hist = projected_gradient(p, GridFunction([0, 1, 2], [0.5, 0.5, 0.5]))
    assert hist[-1] <= -0.99
    assert np.all(np.diff(hist) <= 1e-13)
    assert u.values[:2, 0].tolist() == [0.0, 1.0]


def test_projected_gradient_from_optimum_is_constant():
    p = get_problem("ex0")
    _, hist = projected_gradient(p, GridFunction([0, 1, 2], [0.0, 1.0, 1.0]))
    assert hist == [-1.0]


def test_projected_gradient_lqr():
    p = get_problem("lqr1d")
    _, hist = projected_gradient(p, lambda t: [0.0], steps=500, h=1e-2)
    assert len(hist) <= 501
    assert hist[-1] == pytest.approx(lqr_optimal_cost(), abs=1e-4)
    assert np.all(np.diff(hist) <= 1e-13)


def test_projected_gradient_needs_free_final_state():
    with pytest.raises(UnsupportedKind):
        projected_gradient(get_problem("ex00"), GridFunction([0, 1, 2], [0.5, 0.5, 0.5]))
