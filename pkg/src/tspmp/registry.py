"""Built-in problems and their known extremals.

``ex00``, ``ex0`` and ``ex000`` are the three small counterexamples on
discrete time scales; the others are continuous or hybrid test beds with
closed-form or solver-produced extremals.
"""

from __future__ import annotations

import math

import numpy as np

from .calculus import GridFunction
from .certificate import Extremal, derive_multipliers
from .dynamics import DEFAULT_H, Trajectory, simulate
from .errors import UnsupportedKind
from .geometry import Box, FullSpace, Singleton
from .problem import ControlProblem
from .solver import ShootingGuess
from .timescale import build_timescale, integer_timescale, interval, cantor_timescale, sample_grid

LQR_A = -0.5


def _ex00():
    return ControlProblem(
        timescale=integer_timescale(0, 4),
        n=1, m=1,
        dynamics=["u0"], running_cost="1", boundary=["qa0", "qb0"],
        target=Singleton([0.0, 1.5]), omega=Box([0.0], [1.0]),
        b=2.0, free_time=True, q_a=[0.0], name="ex00",
    )


def _ex0():
    return ControlProblem(
        timescale=integer_timescale(0, 2),
        n=1, m=1,
        dynamics=["u0 - q0"], running_cost="2*q0**2 - u0**2", boundary=["qa0"],
        target=Singleton([0.0]), omega=Box([0.0], [1.0]),
        b=2.0, q_a=[0.0], name="ex0",
    )


def _ex000():
    return ControlProblem(
        timescale=integer_timescale(0, 2),
        n=1, m=1,
        dynamics=["u0 - q0"], running_cost="(u0**2 - q0**2)/2", boundary=["qa0"],
        target=Singleton([1.0]), omega=Box([0.0], [1.0]),
        b=2.0, q_a=[1.0], name="ex000",
    )


def _lqr1d():
    return ControlProblem(
        timescale=interval(0.0, 1.0),
        n=1, m=1,
        dynamics=[f"{LQR_A}*q0 + u0"], running_cost="(q0**2 + u0**2)/2", boundary=["qa0"],
        target=Singleton([1.0]), omega=FullSpace(1),
        b=1.0, q_a=[1.0], name="lqr1d",
    )


HYBRID_SEGMENTS = [[0.0, 1.0], [1.5, 1.5], [2.0, 2.0], [2.5, 3.0]]


def _hybrid_demo():
    return ControlProblem(
        timescale=build_timescale(HYBRID_SEGMENTS),
        n=2, m=1,
        dynamics=["q1", "u0 - 0.5*q0"], running_cost="(q0**2 + u0**2)/2", boundary=["qa0", "qa1"],
        target=Singleton([1.0, 0.0]), omega=Box([-0.5], [0.5]),
        b=3.0, q_a=[1.0, 0.0], name="hybrid_demo",
    )


def _hybrid_sin():
    return ControlProblem(
        timescale=build_timescale([[0.0, 0.5], [0.75, 0.75], [1.0, 1.0], [1.25, 2.0]]),
        n=1, m=1,
        dynamics=["sin(q0) + u0 - 0.1*q0**2"], running_cost="q0**2 + cos(u0)", boundary=["qa0"],
        target=Singleton([0.5]), omega=Box([-1.0], [1.0]),
        b=2.0, q_a=[0.5], name="hybrid_sin",
    )


def _cantor_sin():
    return ControlProblem(
        timescale=cantor_timescale(2),
        n=2, m=1,
        dynamics=["q1", "-sin(q0) + u0*q1"], running_cost="q0**2/2 + u0**2", boundary=["qa0", "qa1"],
        target=Singleton([0.3, 0.2]), omega=Box([-1.0], [1.0]),
        b=1.0, q_a=[0.3, 0.2], name="cantor_sin",
    )


def _discrete_quadratic():
    return ControlProblem(
        timescale=integer_timescale(0, 2),
        n=1, m=1,
        dynamics=["u0"], running_cost="-q0 + u0**2", boundary=["qa0"],
        target=Singleton([0.0]), omega=Box([0.0], [1.0]),
        b=2.0, q_a=[0.0], name="discrete_quadratic",
    )


def _double_integrator():
    return ControlProblem(
        timescale=interval(0.0, 2.5),
        n=2, m=1,
        dynamics=["q1", "u0"], running_cost="1", boundary=["qa0", "qa1", "qb0", "qb1"],
        target=Singleton([1.0, 0.0, 0.0, 0.0]), omega=Box([-1.0], [1.0]),
        b=2.0, free_time=True, q_a=[1.0, 0.0], name="double_integrator_mintime",
    )


def _time_rescaled():
    return ControlProblem(
        timescale=interval(0.0, 1.0),
        n=2, m=1,
        dynamics=["lam0*q1", "lam0*u0"], running_cost="lam0", boundary=["qa0", "qa1", "qb0", "qb1"],
        target=Singleton([1.0, 0.0, 0.0, 0.0]), omega=Box([-1.0], [1.0]),
        b=1.0, q_a=[1.0, 0.0], parameter=[2.0], name="time_rescaled",
    )


_FACTORIES = {
    "ex00": _ex00,
    "ex0": _ex0,
    "ex000": _ex000,
    "lqr1d": _lqr1d,
    "hybrid_demo": _hybrid_demo,
    "hybrid_sin": _hybrid_sin,
    "cantor_sin": _cantor_sin,
    "discrete_quadratic": _discrete_quadratic,
    "double_integrator_mintime": _double_integrator,
    "time_rescaled": _time_rescaled,
}

PAPER_EXAMPLES = ("ex00", "ex0", "ex000")


def names() -> list[str]:
    return list(_FACTORIES)


def get_problem(name: str) -> ControlProblem:
    try:
        return _FACTORIES[name]()
    except KeyError:
        raise UnsupportedKind(f"no built-in problem named {name!r}; known: {', '.join(_FACTORIES)}") from None


# -----------------------------------------------------------------------------
# closed forms
# -----------------------------------------------------------------------------


def lqr_closed_form(t, a: float = LQR_A, q_a: float = 1.0, T: float = 1.0):
    """State and adjoint of ``q' = a q + u``, cost ``∫ (q² + u²)/2``, free end (``u = p``, ``p0 = -1``)."""
    w = math.sqrt(a * a + 1.0)
    M = np.array([[a, 1.0], [1.0, -a]])

    def E(s):
        return math.cosh(w * s) * np.eye(2) + math.sinh(w * s) / w * M

    ET = E(T)
    p_a = -ET[1, 0] * q_a / ET[1, 1]
    t = np.atleast_1d(np.asarray(t, float))
    out = np.array([E(s) @ np.array([q_a, p_a]) for s in t])
    return out[:, 0], out[:, 1]


def lqr_optimal_cost(a: float = LQR_A, q_a: float = 1.0, T: float = 1.0) -> float:
    _, p = lqr_closed_form([0.0], a, q_a, T)
    return float(-0.5 * p[0] * q_a)


def double_integrator_closed_form(t):
    """Minimal-time extremal from ``(1, 0)`` to the origin: switch at 1, arrival at 2."""
    t = np.atleast_1d(np.asarray(t, float))
    q = np.where(t <= 1.0, 1.0 - t ** 2 / 2, 0.5 - (t - 1.0) + (t - 1.0) ** 2 / 2)
    v = np.where(t <= 1.0, -t, t - 2.0)
    u = np.where(t < 1.0, -1.0, 1.0)
    p = np.column_stack([-np.ones_like(t), t - 1.0])
    return np.column_stack([q, v]), u, p


# -----------------------------------------------------------------------------
# reference extremals
# -----------------------------------------------------------------------------

PAPER_CONTROLS = {"ex00": [0.5, 1.0], "ex0": [0.0, 1.0], "ex000": [0.0, 0.0]}


def _discrete_extremal(problem, u_vals):
    grid = sample_grid(problem.timescale, problem.a, problem.b, 1.0)
    u = GridFunction(grid, np.append(u_vals, u_vals[-1]))
    traj = simulate(problem, u)
    return derive_multipliers(problem, traj).extremal


def reference_extremal(name: str, h: float = DEFAULT_H) -> Extremal:
    """The extremal known in closed form (or from the worked example) for a built-in problem."""
    problem = get_problem(name)
    if name in PAPER_CONTROLS:
        return _discrete_extremal(problem, np.array(PAPER_CONTROLS[name]))
    if name == "lqr1d":
        grid = sample_grid(problem.timescale, problem.a, problem.b, h)
        q, p = lqr_closed_form(grid)
        traj = simulate(problem, GridFunction(grid, p), h=h)
        traj = Trajectory(traj.timescale, GridFunction(grid, q), traj.q0, GridFunction(grid, p))
        return Extremal(traj, GridFunction(grid, p), -1.0, [-p[0]])
    if name in ("double_integrator_mintime", "time_rescaled"):
        lam = 2.0
        scale = 1.0 if name == "double_integrator_mintime" else lam
        b = 2.0 if name == "double_integrator_mintime" else 1.0
        grid = sample_grid(problem.timescale, problem.a, b, h / scale)
        q, u, p = double_integrator_closed_form(grid * scale)
        q0 = grid * scale
        traj = Trajectory(problem.timescale, GridFunction(grid, q), GridFunction(grid, q0), GridFunction(grid, u))
        psi = np.concatenate([-p[0], p[-1]])
        return Extremal(traj, GridFunction(grid, p), -1.0, psi)
    raise UnsupportedKind(f"no reference extremal for {name!r}")


def shooting_guess(name: str) -> ShootingGuess:
    """Starting unknowns that lead the shooting solver to the intended extremal."""
    problem = get_problem(name)
    if name == "ex0":
        return ShootingGuess(q_a=[0.0], p_a=[0.0], psi=[0.0], u_hint={0.0: [0.0], 1.0: [1.0]})
    if name == "lqr1d":
        return ShootingGuess(q_a=problem.q_a, p_a=[0.0], psi=[0.0])
    return ShootingGuess(q_a=problem.q_a)


def default_control(name: str, h: float = DEFAULT_H):
    """A smooth admissible control used for variation and finite-difference experiments."""
    problem = get_problem(name)
    if name in PAPER_CONTROLS:
        grid = sample_grid(problem.timescale, problem.a, problem.b, 1.0)
        vals = PAPER_CONTROLS[name]
        return GridFunction(grid, np.append(vals, vals[-1]))
    lo, hi = problem.omega.bounding_box(1.0)
    mid, half = 0.5 * (lo + hi), 0.25 * (hi - lo)
    return lambda t: mid + half * np.sin(2.0 * t + 0.3)
