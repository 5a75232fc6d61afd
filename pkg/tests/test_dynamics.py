import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tspmp.calculus import GridFunction, delta_integral, generalized_exp
from tspmp.dynamics import admissible, check_admissible, control_on_grid, cost, simulate
from tspmp.errors import BlowUp, ControlOutOfOmega
from tspmp.geometry import FullSpace, Singleton
from tspmp.problem import ControlProblem
from tspmp.registry import default_control, get_problem
from tspmp.timescale import build_timescale, integer_timescale, interval, sample_grid


def scalar_problem(ts, dyn, run="0", b=None, omega=None, q_a=1.0):
    return ControlProblem(ts, 1, 1, [dyn], run, ["qa0"], Singleton([q_a]), omega or FullSpace(1),
                          ts.max if b is None else b, q_a=[q_a])


def test_ex00_replay():
    p = get_problem("ex00")
    u = GridFunction([0, 1, 2], [0.5, 1.0, 1.0])
    tr = simulate(p, u, b=2.0)
    assert tr.q.values[:, 0].tolist() == [0, 0.5, 1.5]
    assert tr.cost == 2.0
    assert admissible(p, u, b=2.0)
    assert check_admissible(p, GridFunction([0, 1, 2], [0.0, 0.0, 0.0]), b=2.0) == (False, "target")


def test_constant_field():
    p = scalar_problem(build_timescale([[0, 1], [2, 2], [3, 4]]), "0")
    tr = simulate(p, lambda t: [0.0], h=0.1)
    assert np.all(tr.q.values == 1.0)
    assert cost(p, lambda t: [0.0], h=0.1) == 0.0


def test_exponential_growth():
    p = scalar_problem(interval(0, 1), "q0")
    tr = simulate(p, lambda t: [0.0], h=1e-3)
    assert tr.q.values[-1, 0] == pytest.approx(math.e, abs=1e-8)


def test_generalized_exponential_reproduced_on_mixed_scale():
    ts = build_timescale([[0, 1], [1.5, 1.5], [2, 3]])
    p = scalar_problem(ts, "0.8*q0")
    tr = simulate(p, lambda t: [0.0], h=1e-3)
    assert tr.q.values[-1, 0] == pytest.approx(generalized_exp(ts, 0.8, 0, 3), rel=1e-10)


def test_ex0_cost_formula():
    p = get_problem("ex0")
    for u0, u1 in [(0.0, 1.0), (0.3, 0.2), (1.0, 0.0)]:
        assert cost(p, GridFunction([0, 1, 2], [u0, u1, u1])) == pytest.approx(u0 ** 2 - u1 ** 2, abs=1e-15)


def test_blowup_detected():
    p = scalar_problem(interval(0, 2), "q0**2")
    with pytest.raises(BlowUp):
        simulate(p, lambda t: [0.0], h=1e-3)
    ok, reason = check_admissible(p, lambda t: [0.0], h=1e-3)
    assert not ok and reason == "blowup"


def test_control_outside_omega():
    p = get_problem("ex0")
    with pytest.raises(ControlOutOfOmega):
        simulate(p, GridFunction([0, 1, 2], [2.0, 0.0, 0.0]))
    assert check_admissible(p, GridFunction([0, 1, 2], [2.0, 0.0, 0.0]))[1] == "control"


def test_discrete_recursion_independent_of_step():
    p = scalar_problem(integer_timescale(0, 5, 0.5), "sin(q0) + u0", "q0*u0")
    u = lambda t: [math.cos(t)]
    a = simulate(p, u, h=1e-3)
    b = simulate(p, u, h=0.7)
    assert np.array_equal(a.q.values, b.q.values)
    q = 1.0
    for t in np.arange(0, 5, 0.5):
        q = q + 0.5 * (math.sin(q) + math.cos(t))
    assert a.q.values[-1, 0] == pytest.approx(q, rel=1e-14)


@pytest.mark.parametrize("name", ["hybrid_demo", "hybrid_sin", "cantor_sin"])
def test_rs_step_is_exact(name):
    p = get_problem(name)
    tr = simulate(p, default_control(name), h=1e-2)
    ts = p.timescale
    for k, t in enumerate(tr.grid[:-1]):
        mu = ts.mu(t)
        if mu > 0:
            deriv = (tr.q.values[k + 1] - tr.q.values[k]) / mu
            assert np.allclose(deriv, p.f(tr.q.values[k], tr.u.values[k], t), atol=1e-12, rtol=0)


@pytest.mark.parametrize("name", ["hybrid_demo", "hybrid_sin"])
def test_integral_form(name):
    p = get_problem(name)
    h = 1e-3
    tr = simulate(p, default_control(name), h=h)
    F = GridFunction(tr.grid, [p.f(q, u, t) for q, u, t in zip(tr.q.values, tr.u.values, tr.grid)])
    for t in tr.grid[:: max(1, len(tr.grid) // 7)]:
        rhs = p.q_a + delta_integral(p.timescale, F, p.a, t, rule="left")
        assert np.allclose(tr.q.at(t), rhs, atol=5e-3)


def test_control_sampling_holds_left_value():
    p = get_problem("hybrid_demo")
    u = control_on_grid(p, lambda t: [0.5 * np.sin(t)], h=0.25)
    assert np.allclose(u.values[:, 0], 0.5 * np.sin(u.grid))
    tr = simulate(p, u, h=0.25)
    assert tr.q0.values[0, 0] == 0.0


@settings(max_examples=30)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_flow_gronwall_bound(q1, q2, c1, c2):
    # f(q, u) = A q + B u with ‖A‖ = 1 and ‖B‖ = 1, so L = 1
    p = get_problem("hybrid_demo")
    ts = p.timescale
    base = simulate(p, lambda t: [0.2 * np.sin(3 * t)], q_a=p.q_a, h=1e-2)
    other_u = lambda t: [0.2 * np.sin(3 * t) + c1 * np.cos(t) + c2]
    other_u = control_on_grid(p, lambda t: np.clip(other_u(t), -0.5, 0.5), h=1e-2)
    pert = simulate(p, other_u, q_a=p.q_a + [q1 * 0.1, q2 * 0.1], h=1e-2)
    du = GridFunction(base.grid, np.abs(pert.u.values - base.u.values))
    l1 = delta_integral(ts, du, p.a, p.b, rule="left")[0]
    dq0 = np.linalg.norm([q1 * 0.1, q2 * 0.1])
    for k, t in enumerate(base.grid):
        gap = np.linalg.norm(pert.q.values[k] - base.q.values[k])
        assert gap <= (dq0 + l1) * generalized_exp(ts, 1.0, p.a, t) * (1 + 1e-9) + 1e-12


def test_trajectory_rows():
    tr = simulate(get_problem("ex00"), GridFunction([0, 1, 2], [0.5, 1, 1]), b=2.0)
    rows = tr.to_rows()
    assert len(rows) == 3
    assert sample_grid(tr.timescale, 0, 2, 1.0).tolist() == tr.grid.tolist()
