import numpy as np
import pytest
import sympy as sp

from tspmp.errors import DimensionMismatch, TermError, UnsupportedKind
from tspmp.geometry import AbsCone, Box, FullSpace, Singleton
from tspmp.problem import ControlProblem, problem_from_json
from tspmp.registry import get_problem, names
from tspmp.terms import TermSystem, polynomial_degree, symbols
from tspmp.timescale import integer_timescale


def system(dyn, cost="0", boundary=("qa0",), n=1, m=1, n_lam=0):
    return TermSystem(n, m, dyn, cost, list(boundary), n_lam)


def test_string_and_tree_forms_agree():
    a = system(["u0 - q0*sin(t)"])
    tree = {"op": "-", "args": [{"var": "u0"}, {"op": "*", "args": [{"var": "q0"}, {"op": "sin", "args": [{"var": "t"}]}]}]}
    b = system([tree])
    q, u = np.array([0.7]), np.array([-0.2])
    assert np.allclose(a.f(q, u, 0.3, np.zeros(0)), b.f(q, u, 0.3, np.zeros(0)))


def test_exact_jacobians():
    s = system(["q0**2*u0 + exp(q1)", "log(2 + q0) - cos(u0)"], "q0*u0**2", n=2)
    q, u, t, lam = np.array([0.5, -0.3]), np.array([1.2]), 0.0, np.zeros(0)
    assert np.allclose(s.f_q(q, u, t, lam), [[2 * 0.5 * 1.2, np.exp(-0.3)], [1 / 2.5, 0]])
    assert np.allclose(s.f_u(q, u, t, lam), [[0.25], [np.sin(1.2)]])
    assert np.allclose(s.f0_q(q, u, t, lam), [1.2 ** 2, 0])
    assert np.allclose(s.f0_uu(q, u, t, lam), [[1.0]])
    assert s.autonomous and s.u_degree is None


def test_jacobians_match_finite_differences():
    s = system(["sin(q0)*u0 + t*q1", "q0*q1 - u1**3"], "exp(u0)*q1", n=2, m=2)
    q, u, t, lam = np.array([0.3, -1.1]), np.array([0.4, 0.9]), 0.7, np.zeros(0)
    eps = 1e-6
    for fn, jac, x, which in [(s.f, s.f_q, q, 0), (s.f, s.f_u, u, 1)]:
        J = jac(q, u, t, lam)
        for i in range(len(x)):
            d = np.zeros(len(x))
            d[i] = eps
            args_p = [q, u] if which else [q + d, u]
            args_m = [q, u] if which else [q - d, u]
            if which:
                args_p, args_m = [q, u + d], [q, u - d]
            fd = (fn(*args_p, t, lam) - fn(*args_m, t, lam)) / (2 * eps)
            assert np.allclose(J[:, i], fd, atol=1e-8)


def test_rejected_terms():
    with pytest.raises(TermError):
        system(["abs(q0)"])
    with pytest.raises(TermError):
        system(["q0**0.5"])
    with pytest.raises(TermError):
        system(["x + 1"])
    with pytest.raises(TermError):
        system(["qa0"])
    with pytest.raises(TermError):
        system(["q0", "q0"])
    with pytest.raises(TermError):
        system(["__import__('os')"])


def test_polynomial_degree():
    u = symbols("u", 2)
    q = symbols("q", 1)[0]
    assert polynomial_degree(u[0] * u[1] + q, u) == 2
    assert polynomial_degree(sp.sin(q) * u[0], u) == 1
    assert polynomial_degree(sp.sin(u[0]), u) is None


def test_parameter_and_time_dependence():
    s = system(["lam0*q0 + t"], "lam0*u0**2", n_lam=1)
    assert not s.autonomous and s.u_degree == 2
    lam = np.array([3.0])
    assert s.f(np.array([2.0]), np.array([0.0]), 1.0, lam)[0] == 7.0
    assert s.f_lam(np.array([2.0]), np.array([0.0]), 1.0, lam).tolist() == [[2.0]]


def test_problem_validation():
    ts = integer_timescale(0, 2)
    with pytest.raises(DimensionMismatch):
        ControlProblem(ts, 1, 2, ["u0"], "0", ["qa0"], Singleton([0.0]), Box([0], [1]), 2.0)
    with pytest.raises(UnsupportedKind):
        ControlProblem(ts, 1, 2, ["u0"], "0", ["qa0", "qb0"], AbsCone(), Box([0, 0], [1, 1]), 2.0)
    with pytest.raises(DimensionMismatch):
        ControlProblem(ts, 1, 1, ["u0"], "0", ["qa0"], FullSpace(2), Box([0], [1]), 2.0)


@pytest.mark.parametrize("name", names())
def test_problem_json_round_trip(name):
    p = get_problem(name)
    back = problem_from_json(p.to_json())
    assert back.to_json() == p.to_json()
    q = np.linspace(0.1, 0.4, p.n)
    u = np.full(p.m, 0.2)
    assert np.allclose(back.f(q, u, p.a), p.f(q, u, p.a))


def test_problem_json_errors():
    with pytest.raises(TermError):
        problem_from_json({})
    with pytest.raises(TermError):
        problem_from_json({**get_problem("ex0").to_json(), "extra": 1})
    assert problem_from_json({"builtin": "ex0"}).name == "ex0"
