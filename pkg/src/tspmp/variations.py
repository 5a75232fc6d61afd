"""Needle-like variations, variation vectors and finite-difference checks.

Variation vectors are propagated with the tangent map of the very scheme
used by :func:`tspmp.dynamics.simulate`: the exact linearization
``I + μ ∂f̄/∂q̄`` at right-scattered points and the tangent of one RK4 step
on dense cells.  The adjoint in :mod:`tspmp.certificate` uses the
transposes of the same matrices, which makes ``⟨p̄, w̄⟩`` exactly constant
along the grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .calculus import GridFunction, iter_cells
from .dynamics import DEFAULT_H, Trajectory, simulate
from .errors import AlphaNotInDenseSet, BetaNotInV, NotRD, NotRS
from .geometry import alpha_set_probe, is_dense_direction
from .problem import ControlProblem
from .timescale import SNAP_TOL


@dataclass(frozen=True)
class NeedleRS:
    r: float
    y: np.ndarray
    alpha: float = 0.0


@dataclass(frozen=True)
class NeedleRD:
    s: float
    z: np.ndarray
    beta: float = 0.0


# -----------------------------------------------------------------------------
# control perturbations
# -----------------------------------------------------------------------------


def perturb_rs(problem: ControlProblem, u: GridFunction, needle: NeedleRS) -> GridFunction:
    """Replace ``u(r)`` by ``u(r) + α (y - u(r))``."""
    ts = problem.timescale
    if not ts.is_rs(needle.r):
        raise NotRS(f"{needle.r} is not right-scattered")
    k = u.index(needle.r)
    ur = u.values[k]
    y = np.atleast_1d(np.asarray(needle.y, float))
    if needle.alpha != 0 and not alpha_set_probe(problem.omega, ur, y, [needle.alpha])[0]:
        raise AlphaNotInDenseSet(f"u(r) + {needle.alpha}(y - u(r)) leaves Ω")
    vals = u.values.copy()
    vals[k] = ur + needle.alpha * (y - ur)
    return u.with_values(vals)


def perturb_rd(problem: ControlProblem, u: GridFunction, needle: NeedleRD) -> GridFunction:
    """Set the control to ``z`` on ``[s, s + β[``; ``s + β`` is added to the grid."""
    ts = problem.timescale
    s, beta = needle.s, float(needle.beta)
    if ts.is_rs(s) or s >= ts.max - SNAP_TOL:
        raise NotRD(f"{s} is not right-dense")
    if beta < 0 or (s + beta) not in ts or ts.segment_index(s + beta) != ts.segment_index(s):
        raise BetaNotInV(f"s + β = {s + beta} does not keep [s, s + β] inside the time scale")
    if beta == 0:
        return u
    z = np.atleast_1d(np.asarray(needle.z, float))
    grid = np.unique(np.concatenate([u.grid, [s, s + beta]]))
    grid = grid[np.concatenate([[True], np.diff(grid) > SNAP_TOL])]
    vals = np.array([u.left_value(t) for t in grid])
    inside = (grid >= s - SNAP_TOL) & (grid < s + beta - SNAP_TOL)
    vals[inside] = z
    return GridFunction(grid, vals)


# -----------------------------------------------------------------------------
# linearization
# -----------------------------------------------------------------------------


class Linearization:
    """Per-cell tangent maps ``Φ̄_k`` of the augmented scheme along a trajectory."""

    def __init__(self, problem: ControlProblem, traj: Trajectory):
        self.problem = problem
        self.traj = traj

    @cached_property
    def transitions(self) -> list[np.ndarray]:
        p, tr = self.problem, self.traj
        n = p.n
        grid = tr.grid
        out = []
        eye = np.eye(n + 1)
        for k, width, rs in iter_cells(tr.timescale, grid, tr.a, tr.b):
            t, uk = grid[k], tr.u.values[k]
            y = tr.q_bar(k)
            if rs:
                out.append(eye + width * p.jac_bar(y[:n], uk, t))
                continue
            F = lambda yy, tt: p.f_bar(yy[:n], uk, tt)
            J = lambda yy, tt: p.jac_bar(yy[:n], uk, tt)
            h2 = 0.5 * width
            k1 = F(y, t)
            y2 = y + h2 * k1
            k2 = F(y2, t + h2)
            y3 = y + h2 * k2
            k3 = F(y3, t + h2)
            y4 = y + width * k3
            K1 = J(y, t)
            K2 = J(y2, t + h2) @ (eye + h2 * K1)
            K3 = J(y3, t + h2) @ (eye + h2 * K2)
            K4 = J(y4, t + width) @ (eye + width * K3)
            out.append(eye + width / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4))
        return out

    def propagate(self, k0: int, w0: np.ndarray) -> GridFunction:
        """Solve the linearized scheme from grid index ``k0`` with value ``w0``."""
        grid = self.traj.grid
        ws = [np.asarray(w0, float)]
        for Phi in self.transitions[k0:]:
            ws.append(Phi @ ws[-1])
        return GridFunction(grid[k0:], np.array(ws))

    def adjoint(self, p_bar_b: np.ndarray) -> GridFunction:
        """Backward recursion ``p̄_k = Φ̄_k^T p̄_{k+1}`` from ``p̄(b)``."""
        grid = self.traj.grid
        ps = [np.asarray(p_bar_b, float)]
        for Phi in reversed(self.transitions):
            ps.append(Phi.T @ ps[-1])
        return GridFunction(grid, np.array(ps[::-1]))


def linearize(problem: ControlProblem, traj: Trajectory) -> Linearization:
    return Linearization(problem, traj)


def _lin(problem, traj, lin):
    return lin if lin is not None else Linearization(problem, traj)


def variation_vector_rs(problem, traj: Trajectory, r: float, y, lin: Linearization | None = None) -> GridFunction:
    """``w̄`` on ``[σ(r), b]`` seeded with ``μ(r) ∂f̄/∂u (y - u(r))``."""
    ts = problem.timescale
    if not ts.is_rs(r):
        raise NotRS(f"{r} is not right-scattered")
    k = traj.q.index(r)
    q, u = traj.q.values[k], traj.u.values[k]
    y = np.atleast_1d(np.asarray(y, float))
    w0 = ts.mu(r) * problem.jac_bar_u(q, u, r) @ (y - u)
    return _lin(problem, traj, lin).propagate(k + 1, w0)


def variation_vector_rd(problem, traj: Trajectory, s: float, z, lin: Linearization | None = None) -> GridFunction:
    """``w̄`` on ``[s, b]`` seeded with ``f̄(q(s), z, s) - f̄(q(s), u(s), s)``."""
    ts = problem.timescale
    if ts.is_rs(s) or s >= traj.b - SNAP_TOL:
        raise NotRD(f"{s} is not a right-dense point before b")
    k = traj.q.index(s)
    q, u = traj.q.values[k], traj.u.values[k]
    z = np.atleast_1d(np.asarray(z, float))
    w0 = problem.f_bar(q, z, s) - problem.f_bar(q, u, s)
    return _lin(problem, traj, lin).propagate(k, w0)


def variation_vector_init(problem, traj: Trajectory, dq_a, lin: Linearization | None = None) -> GridFunction:
    """``w̄`` on ``[a, b]`` seeded with ``(dq_a, 0)``."""
    dq_a = np.asarray(dq_a, float).reshape(problem.n)
    return _lin(problem, traj, lin).propagate(0, np.append(dq_a, 0.0))


# -----------------------------------------------------------------------------
# finite-difference checks
# -----------------------------------------------------------------------------


@dataclass
class FDResult:
    """Errors of the difference quotients against the variation vector."""

    kind: str
    steps: np.ndarray
    errors: np.ndarray

    @property
    def order(self) -> float:
        """Least-squares slope of ``log(error)`` against ``log(step)``."""
        ok = self.errors > 0
        if ok.sum() < 2:
            return float("inf")
        return float(np.polyfit(np.log(self.steps[ok]), np.log(self.errors[ok]), 1)[0])

    @property
    def smallest_step_error(self) -> float:
        return float(self.errors[np.argmin(self.steps)])

    def monotone(self, slack: float = 0.1) -> bool:
        order = np.argsort(-self.steps)
        e = self.errors[order]
        return bool(np.all(e[1:] <= e[:-1] * (1 + slack) + 1e-14))

    def rows(self) -> list[tuple[float, float]]:
        return [(float(a), float(e)) for a, e in zip(self.steps, self.errors)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["alpha", "error"])
            for a, e in self.rows():
                wr.writerow([format(a, ".17g"), format(e, ".17g")])


def _bar_values(traj: Trajectory) -> np.ndarray:
    return np.column_stack([traj.q.values, traj.q0.values])


def _sup_error(base, pert, w: GridFunction, step, times) -> float:
    err = 0.0
    for t in times:
        kb, kp, kw = base.q.index(t), pert.q.index(t), w.index(t)
        diff = (_bar_values(pert)[kp] - _bar_values(base)[kb]) / step
        err = max(err, float(np.linalg.norm(diff - w.values[kw])))
    return err


def default_steps(lo: int = 10, hi: int = 20) -> list[float]:
    return [2.0 ** -k for k in range(lo, hi + 1)]


def fd_check_rs(problem, u, q_a, r, y, alphas=None, b=None, h: float = DEFAULT_H) -> FDResult:
    alphas = default_steps() if alphas is None else list(alphas)
    base = simulate(problem, u, q_a, b, h)
    k = base.q.index(r)
    y = np.atleast_1d(np.asarray(y, float))
    if not is_dense_direction(problem.omega, base.u.values[k], y):
        raise AlphaNotInDenseSet(f"{y} is not an Ω-dense direction from u({r})")
    bad = [a for a, ok in zip(alphas, alpha_set_probe(problem.omega, base.u.values[k], y, alphas)) if not ok]
    if bad:
        raise AlphaNotInDenseSet(f"α values {bad} leave Ω")
    w = variation_vector_rs(problem, base, r, y)
    times = w.grid
    errs = []
    for a in alphas:
        up = perturb_rs(problem, base.u, NeedleRS(r, y, a))
        pert = simulate(problem, up, q_a, base.b, h)
        errs.append(_sup_error(base, pert, w, a, times))
    return FDResult("rs", np.array(alphas), np.array(errs))


def fd_check_rd(problem, u, q_a, s, z, betas=None, b=None, h: float = DEFAULT_H) -> FDResult:
    """Difference quotients of RD needles, compared on ``[s + δ, b]`` with ``δ`` the next grid step."""
    betas = default_steps() if betas is None else list(betas)
    base0 = simulate(problem, u, q_a, b, h)
    k = base0.q.index(s)
    delta_t = base0.grid[k + 1]
    if max(betas) >= delta_t - s:
        raise BetaNotInV("every β must stay below the first grid step after s")
    times = base0.grid[k + 1:]
    errs = []
    for beta in betas:
        needle = NeedleRD(s, z, beta)
        # base and perturbed runs share the refined grid
        u_ref = perturb_rd(problem, base0.u, NeedleRD(s, base0.u.values[k], beta))
        base = simulate(problem, u_ref, q_a, base0.b, h)
        pert = simulate(problem, perturb_rd(problem, base0.u, needle), q_a, base0.b, h)
        w = variation_vector_rd(problem, base, s, z)
        errs.append(_sup_error(base, pert, w, beta, times))
    return FDResult("rd", np.array(betas), np.array(errs))


def fd_check_init(problem, u, q_a, dq_a, gammas=None, b=None, h: float = DEFAULT_H) -> FDResult:
    gammas = default_steps() if gammas is None else list(gammas)
    q_a = problem.q_a if q_a is None else np.asarray(q_a, float)
    base = simulate(problem, u, q_a, b, h)
    dq_a = np.asarray(dq_a, float).reshape(problem.n)
    w = variation_vector_init(problem, base, dq_a)
    errs = []
    for g in gammas:
        pert = simulate(problem, base.u, q_a + g * dq_a, base.b, h)
        errs.append(_sup_error(base, pert, w, g, base.grid))
    return FDResult("init", np.array(gammas), np.array(errs))
