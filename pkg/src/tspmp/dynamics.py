"""Forward simulation of controlled Δ-dynamics with the cost coordinate."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .calculus import GridFunction, iter_cells
from .errors import BlowUp, ControlOutOfOmega, NotInScale, NotInTarget, TspmpError
from .problem import ControlProblem
from .timescale import SNAP_TOL, TimeScale, sample_grid

log = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e8
DEFAULT_H = 1e-3
TOL_TARGET = 1e-8


@dataclass(frozen=True, eq=False)
class Trajectory:
    """State, cost coordinate and control on a common grid of ``[a, b]_T``.

    The control value stored at ``b`` is never used by the dynamics; it is
    kept so that all three signals share one grid.
    """

    timescale: TimeScale
    q: GridFunction
    q0: GridFunction
    u: GridFunction

    @property
    def grid(self) -> np.ndarray:
        return self.q.grid

    @property
    def a(self) -> float:
        return float(self.grid[0])

    @property
    def b(self) -> float:
        return float(self.grid[-1])

    @property
    def cost(self) -> float:
        return float(self.q0.values[-1, 0])

    def q_bar(self, k: int) -> np.ndarray:
        return np.append(self.q.values[k], self.q0.values[k, 0])

    def to_rows(self) -> list[list]:
        """Rows ``t, class, q..., u..., q0`` for CSV export."""
        rows = []
        for k, t in enumerate(self.grid):
            label = self.timescale.classify(t).label if t < self.timescale.max else "RD/LD"
            rows.append([float(t), label, *self.q.values[k], *self.u.values[k], self.q0.values[k, 0]])
        return rows


def control_on_grid(problem: ControlProblem, u, b: float | None = None, h: float = DEFAULT_H) -> GridFunction:
    """Coerce a control description into a grid function on ``[a, b]_T``.

    ``u`` may be a :class:`GridFunction` (refined with the ``h``-grid, left
    values in between), a callable of ``t`` or a constant vector.
    """
    ts = problem.timescale
    b = problem.b if b is None else ts.snap(b)
    base = sample_grid(ts, problem.a, b, h)
    if isinstance(u, GridFunction):
        own = u.grid[(u.grid >= problem.a - SNAP_TOL) & (u.grid <= b + SNAP_TOL)]
        grid = np.unique(np.concatenate([base, own]))
        grid = _dedupe(grid)
        vals = np.array([u.left_value(t) for t in grid])
        return GridFunction(grid, vals)
    if callable(u):
        return GridFunction(base, np.array([np.atleast_1d(u(t)) for t in base], dtype=float))
    vec = np.atleast_1d(np.asarray(u, float))
    return GridFunction(base, np.tile(vec, (len(base), 1)))


def _dedupe(grid: np.ndarray) -> np.ndarray:
    keep = np.concatenate([[True], np.diff(grid) > SNAP_TOL])
    return grid[keep]


def rk4_step(field, y, t, w):
    k1 = field(y, t)
    k2 = field(y + 0.5 * w * k1, t + 0.5 * w)
    k3 = field(y + 0.5 * w * k2, t + 0.5 * w)
    k4 = field(y + w * k3, t + w)
    return y + w / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(
    problem: ControlProblem,
    u,
    q_a=None,
    b: float | None = None,
    h: float = DEFAULT_H,
    blowup_threshold: float = BLOWUP_THRESHOLD,
) -> Trajectory:
    """Integrate ``(q, q⁰)`` forward from ``(q_a, 0)``.

    Right-scattered points take the exact step ``q(σ) = q + μ f``; dense
    cells take one classical RK4 step with the control frozen at its left
    value.
    """
    ts = problem.timescale
    b = problem.b if b is None else ts.snap(b)
    if b not in ts:
        raise NotInScale(f"final time {b} is not in the time scale")
    q_a = problem.q_a if q_a is None else np.asarray(q_a, float)
    if q_a is None:
        raise ValueError("no initial state given and the problem has no default")
    ug = control_on_grid(problem, u, b, h)
    grid = ug.grid
    for k, t in enumerate(grid[:-1]):
        if not problem.omega.contains(ug.values[k]):
            raise ControlOutOfOmega(f"u({t}) = {ug.values[k]} is not in {problem.omega!r}")
    n = problem.n
    ybar = np.zeros((len(grid), n + 1))
    ybar[0, :n] = q_a
    for k, width, rs in iter_cells(ts, grid, problem.a, b):
        t = grid[k]
        uk = ug.values[k]
        y = ybar[k]
        if rs:
            nxt = y + width * problem.f_bar(y[:n], uk, t)
        else:
            nxt = rk4_step(lambda yy, tt: problem.f_bar(yy[:n], uk, tt), y, t, width)
        if not np.all(np.isfinite(nxt)) or np.linalg.norm(nxt[:n]) > blowup_threshold:
            raise BlowUp(f"state left the ball of radius {blowup_threshold:g} near t={grid[k + 1]}", float(grid[k + 1]))
        ybar[k + 1] = nxt
    return Trajectory(ts, GridFunction(grid, ybar[:, :n]), GridFunction(grid, ybar[:, n]), ug)


def cost(problem: ControlProblem, u, q_a=None, b=None, h: float = DEFAULT_H) -> float:
    return simulate(problem, u, q_a, b, h).cost


def target_defect(problem: ControlProblem, traj: Trajectory) -> float:
    """Distance from ``g(q(a), q(b))`` to the target."""
    gval = problem.g(traj.q.values[0], traj.q.values[-1])
    return float(np.linalg.norm(gval - problem.target.project(gval)))


def check_admissible(problem, u, q_a=None, b=None, h: float = DEFAULT_H, tol_target: float = TOL_TARGET):
    """``(ok, reason)`` with reason one of None, "blowup", "control", "target", "error"."""
    try:
        traj = simulate(problem, u, q_a, b, h)
    except BlowUp:
        return False, "blowup"
    except ControlOutOfOmega:
        return False, "control"
    except TspmpError as exc:
        log.debug("admissibility check failed: %s", exc)
        return False, "error"
    if target_defect(problem, traj) > tol_target:
        return False, "target"
    return True, None


def admissible(problem, u, q_a=None, b=None, h: float = DEFAULT_H, tol_target: float = TOL_TARGET) -> bool:
    return check_admissible(problem, u, q_a, b, h, tol_target)[0]


def require_in_target(problem: ControlProblem, traj: Trajectory, tol_target: float = TOL_TARGET) -> np.ndarray:
    gval = problem.g(traj.q.values[0], traj.q.values[-1])
    if np.linalg.norm(gval - problem.target.project(gval)) > tol_target:
        raise NotInTarget(f"g(q(a), q(b)) = {gval} is not in the target")
    return problem.target.project(gval)
