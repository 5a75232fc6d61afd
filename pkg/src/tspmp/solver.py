"""Producers of candidate extremals.

* :func:`brute_force_discrete` enumerates controls on small discrete scales;
* :func:`shooting_solve` root-finds the boundary conditions of the
  Hamiltonian system with the control given pointwise by the Hamiltonian
  (full maximization at dense points, stationarity on the stable cone at
  scattered points);
* :func:`projected_gradient` improves a control with the discrete adjoint.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

from .calculus import GridFunction, iter_cells
from .certificate import Extremal, adjoint_solve, hamiltonian_grad_q, hamiltonian_grad_u
from .dynamics import DEFAULT_H, TOL_TARGET, Trajectory, control_on_grid, simulate, target_defect
from .errors import (
    BlowUp,
    ControlOutOfOmega,
    DegenerateArgmax,
    NoAdmissibleControl,
    NoConvergence,
    StepTooLarge,
    TooLarge,
    UnsupportedKind,
)
from .maximize import maximize_hamiltonian
from .problem import ControlProblem
from .timescale import SNAP_TOL, sample_grid
from .variations import Linearization

log = logging.getLogger(__name__)

MAX_STEPS = 12
MAX_COMBINATIONS = 10_000


# -----------------------------------------------------------------------------
# brute force
# -----------------------------------------------------------------------------


@dataclass
class BruteForceResult:
    u: np.ndarray
    cost: float
    b: float
    per_b: dict = field(default_factory=dict)

    def control(self, problem: ControlProblem) -> GridFunction:
        grid = sample_grid(problem.timescale, problem.a, self.b, 1.0)
        return GridFunction(grid, np.vstack([self.u, self.u[-1:]]))


def _per_step_sets(control_grid, steps: int, m: int) -> list[list[tuple]]:
    """Normalize the control grid to one sorted list of control tuples per step.

    ``control_grid`` is either one set used at every step or a list with one
    set per step; a set is a sequence of scalars (``m = 1``) or of vectors.
    """

    def as_set(obj):
        arr = np.asarray(obj, float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1) if m == 1 else arr.reshape(1, -1)
        return sorted({tuple(row) for row in arr})

    per_step = (
        isinstance(control_grid, (list, tuple))
        and len(control_grid) == steps
        and all(np.ndim(c) == (1 if m == 1 else 2) for c in control_grid)
    )
    if per_step:
        return [as_set(c) for c in control_grid]
    s = as_set(control_grid)
    return [s] * steps


def brute_force_discrete(problem: ControlProblem, control_grid, q_a=None, b_candidates=None,
                         tol_target: float = TOL_TARGET) -> BruteForceResult:
    """Exhaustive search on a purely discrete window.

    Free-time problems loop over ``b_candidates`` (ascending); the result is
    the overall minimum cost, ties going to the smaller ``b`` and then to
    the lexicographically smaller control sequence.
    """
    ts = problem.timescale
    if b_candidates is None:
        b_candidates = [problem.b]
    best = None
    per_b = {}
    for b in sorted(float(x) for x in b_candidates):
        b = ts.snap(b)
        grid = sample_grid(ts, problem.a, b, 1.0)
        steps = len(grid) - 1
        if any(not ts.is_rs(t) for t in grid[:-1]):
            raise UnsupportedKind("brute force needs a purely discrete window")
        if steps > MAX_STEPS:
            raise TooLarge(f"{steps} steps exceed the limit of {MAX_STEPS}")
        sets = _per_step_sets(control_grid, steps, problem.m)
        total = int(np.prod([len(s) for s in sets]))
        if total > MAX_COMBINATIONS:
            raise TooLarge(f"{total} control combinations exceed {MAX_COMBINATIONS}")
        best_b = None
        for combo in itertools.product(*sets):
            u = np.array(combo, float)
            ug = GridFunction(grid, np.vstack([u, u[-1:]]))
            try:
                traj = simulate(problem, ug, q_a, b)
            except (BlowUp, ControlOutOfOmega):
                continue
            if target_defect(problem, traj) > tol_target:
                continue
            c = traj.cost
            if best_b is None or c < best_b[1] - 1e-12:
                best_b = (u, c)
        per_b[b] = None if best_b is None else best_b[1]
        if best_b is not None and (best is None or best_b[1] < best.cost - 1e-12):
            best = BruteForceResult(best_b[0], best_b[1], b)
    if best is None:
        raise NoAdmissibleControl("no control on the grid reaches the target")
    best.per_b = per_b
    return best


# -----------------------------------------------------------------------------
# shooting
# -----------------------------------------------------------------------------


@dataclass
class ShootingGuess:
    """Initial unknowns; missing parts default to the problem's ``q_a`` and zeros.

    ``u_hint`` maps scattered times to a starting control for the local
    stationarity solve there.
    """

    q_a: np.ndarray | None = None
    p_a: np.ndarray | None = None
    psi: np.ndarray | None = None
    b: float | None = None
    u_hint: dict = field(default_factory=dict)


@dataclass
class ShootingOptions:
    h: float = DEFAULT_H
    max_iter: int = 200
    tol: float = 1e-10
    tie_fraction: float = 0.1
    seed: int = 0


@dataclass
class ShootingResult:
    extremal: Extremal
    defect: float
    nfev: int
    history: list
    jacobian_cond: float


class _Layout:
    def __init__(self, problem: ControlProblem):
        self.n, self.j = problem.n, problem.j
        self.free = problem.free_time

    @property
    def size(self):
        return 2 * self.n + self.j + (1 if self.free else 0)

    def split(self, z):
        n, j = self.n, self.j
        b = z[2 * n + j] if self.free else None
        return z[:n], z[n:2 * n], z[2 * n:2 * n + j], b

    def join(self, q_a, p_a, psi, b=None):
        parts = [q_a, p_a, psi] + ([[b]] if self.free else [])
        return np.concatenate([np.asarray(x, float).ravel() for x in parts])


@dataclass
class HamiltonianFlow:
    trajectory: Trajectory
    p: GridFunction
    ties: int
    rs_residual: float


def _rs_solve(problem, q, p_r, p0, r, mu, hint):
    """Find ``(p(σ(r)), u(r))`` from ``p(r)``: the shifted adjoint step and stationarity."""
    n, m = problem.n, problem.m
    omega = problem.omega
    proj = omega.project if omega.convex else omega.nearest

    def resid(x):
        ps, u = x[:n], x[n:]
        r1 = ps + mu * hamiltonian_grad_q(problem, q, u, ps, p0, r) - p_r
        r2 = u - proj(u + hamiltonian_grad_u(problem, q, u, ps, p0, r))
        return np.concatenate([r1, r2])

    u0 = hint if hint is not None else maximize_hamiltonian(problem, q, p_r, p0, r).v
    x0 = np.concatenate([p_r, np.asarray(u0, float).reshape(m)])
    f0 = resid(x0)
    if np.linalg.norm(f0) <= 1e-13:
        return x0[:n], x0[n:], 0.0
    sol = root(resid, x0, method="hybr", options={"xtol": 1e-13})
    x = sol.x
    res = float(np.linalg.norm(resid(x)))
    if res > 1e-9:
        lm = root(resid, x0, method="lm", options={"xtol": 1e-14, "ftol": 1e-14})
        if np.linalg.norm(resid(lm.x)) < res:
            x, res = lm.x, float(np.linalg.norm(resid(lm.x)))
    u = x[n:]
    if not omega.contains(u):
        u = proj(u)
    return x[:n], u, res


def integrate_hamiltonian_flow(problem: ControlProblem, q_a, p_a, p0: float, b: float,
                               h: float = DEFAULT_H, u_hint: dict | None = None, seed: int = 0) -> HamiltonianFlow:
    """Integrate ``q^Δ = ∂H/∂p, p^Δ = -∂H/∂q`` with the control from the Hamiltonian."""
    ts = problem.timescale
    n = problem.n
    grid = sample_grid(ts, problem.a, b, h)
    N = len(grid)
    Q = np.zeros((N, n))
    Q0 = np.zeros(N)
    P = np.zeros((N, n))
    U = np.zeros((N, problem.m))
    Q[0], P[0] = q_a, p_a
    ties = 0
    rs_res = 0.0
    u_hint = u_hint or {}

    def field_(y, t, best=None):
        q, p = y[:n], y[n + 1:]
        if best is None:
            best = maximize_hamiltonian(problem, q, p, p0, t, seed)
        u = best.v
        return np.concatenate([problem.f(q, u, t), [problem.f0(q, u, t)], -hamiltonian_grad_q(problem, q, u, p, p0, t)])

    for k, width, rs in iter_cells(ts, grid, problem.a, b):
        t = grid[k]
        q, p = Q[k], P[k]
        if rs:
            hint = next((v for key, v in u_hint.items() if abs(float(key) - t) <= SNAP_TOL), None)
            ps, u, res = _rs_solve(problem, q, p, p0, t, width, hint)
            rs_res = max(rs_res, res)
            U[k] = u
            Q[k + 1] = q + width * problem.f(q, u, t)
            Q0[k + 1] = Q0[k] + width * problem.f0(q, u, t)
            P[k + 1] = ps
        else:
            best = maximize_hamiltonian(problem, q, p, p0, t, seed)
            U[k] = best.v
            ties += int(best.tie)
            y = np.concatenate([q, [Q0[k]], p])
            k1 = field_(y, t, best)
            k2 = field_(y + 0.5 * width * k1, t + 0.5 * width)
            k3 = field_(y + 0.5 * width * k2, t + 0.5 * width)
            k4 = field_(y + width * k3, t + width)
            y = y + width / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            Q[k + 1], Q0[k + 1], P[k + 1] = y[:n], y[n], y[n + 1:]
        if not np.all(np.isfinite(Q[k + 1])) or not np.all(np.isfinite(P[k + 1])):
            raise BlowUp(f"Hamiltonian flow diverged near t={grid[k + 1]}", float(grid[k + 1]))
    U[-1] = U[-2]
    traj = Trajectory(ts, GridFunction(grid, Q), GridFunction(grid, Q0), GridFunction(grid, U))
    return HamiltonianFlow(traj, GridFunction(grid, P), ties, rs_res)


def shooting_defect(problem: ControlProblem, z, h: float = DEFAULT_H, u_hint: dict | None = None,
                    seed: int = 0, p0: float = -1.0, flow_out: list | None = None) -> np.ndarray:
    """Boundary defects of the Hamiltonian flow for the unknowns ``z = (q_a, p_a, ψ[, b])``.

    Components: ``g - P_S(g - ψ)`` (target membership and ``-ψ ∈ O_S(g)``),
    ``p(a) + ∂g/∂q1^T ψ``, ``p(b) - ∂g/∂q2^T ψ`` and, for free final time,
    ``max_v H`` at ``b``.
    """
    lay = _Layout(problem)
    q_a, p_a, psi, b = lay.split(np.asarray(z, float))
    ts = problem.timescale
    if b is None:
        b = problem.b
    else:
        if b not in ts or not ts.is_interior(b):
            raise NoConvergence(f"final time {b:.6g} left the interior of its dense segment", [])
        b = float(b)
    flow = integrate_hamiltonian_flow(problem, q_a, p_a, p0, b, h, u_hint, seed)
    if flow_out is not None:
        flow_out.append(flow)
    tr = flow.trajectory
    q_b = tr.q.values[-1]
    lam = problem.lam
    gval = problem.g(q_a, q_b)
    G1 = problem.terms.g_q1(q_a, q_b, lam)
    G2 = problem.terms.g_q2(q_a, q_b, lam)
    parts = [
        gval - problem.target.project(gval - psi),
        flow.p.values[0] + G1.T @ psi,
        flow.p.values[-1] - G2.T @ psi,
    ]
    if lay.free:
        best = maximize_hamiltonian(problem, q_b, flow.p.values[-1], p0, b, seed)
        parts.append([best.value])
    return np.concatenate([np.asarray(x, float).ravel() for x in parts])


def _fd_jacobian(fun, z, eps=1e-7):
    f0 = fun(z)
    J = np.zeros((len(f0), len(z)))
    for i in range(len(z)):
        dz = np.zeros_like(z)
        dz[i] = eps * max(1.0, abs(z[i]))
        J[:, i] = (fun(z + dz) - f0) / dz[i]
    return J


def shooting_solve(problem: ControlProblem, guess: ShootingGuess | None = None,
                   opts: ShootingOptions | None = None) -> ShootingResult:
    """Solve the boundary-value problem of the extremal equations (normal case ``p0 = -1``).

    The returned multipliers are rescaled onto the unit sphere
    ``p0² + |ψ|² = 1``.
    """
    guess = guess or ShootingGuess()
    opts = opts or ShootingOptions()
    lay = _Layout(problem)
    n, j = problem.n, problem.j
    q_a = guess.q_a if guess.q_a is not None else problem.q_a
    if q_a is None:
        q_a = np.zeros(n)
    z0 = lay.join(
        q_a,
        guess.p_a if guess.p_a is not None else np.zeros(n),
        guess.psi if guess.psi is not None else np.zeros(j),
        guess.b if guess.b is not None else problem.b,
    )
    history: list[float] = []
    memo: dict[bytes, tuple] = {}

    def evaluate(z):
        key = np.asarray(z, float).tobytes()
        if key not in memo:
            flows: list = []
            F = shooting_defect(problem, z, opts.h, guess.u_hint, opts.seed, flow_out=flows)
            memo.clear()
            memo[key] = (F, flows[0])
        return memo[key]

    def fun(z):
        F = evaluate(z)[0]
        history.append(float(np.linalg.norm(F)))
        return F

    try:
        sol = root(fun, z0, method="hybr", options={"xtol": 1e-13, "maxfev": opts.max_iter * (lay.size + 1)})
        z = sol.x
        F = fun(z)
        if np.linalg.norm(F) > opts.tol:
            lm = root(fun, z, method="lm", options={"xtol": 1e-15, "ftol": 1e-15, "maxiter": opts.max_iter * (lay.size + 1)})
            if np.linalg.norm(fun(lm.x)) < np.linalg.norm(F):
                z = lm.x
                F = fun(z)
    except (BlowUp, NoConvergence) as exc:
        raise NoConvergence(f"shooting aborted: {exc}", history) from None
    defect = float(np.linalg.norm(F))
    if not np.isfinite(defect) or defect > opts.tol:
        raise NoConvergence(f"shooting stalled at defect {defect:.3e}", history)
    flow = evaluate(z)[1]
    nodes = len(flow.trajectory.grid)
    if flow.ties > max(3, opts.tie_fraction * nodes):
        raise DegenerateArgmax(f"the maximizer of H is not unique at {flow.ties} of {nodes} grid points")
    if flow.rs_residual > 1e-8:
        raise NoConvergence(f"stationarity at scattered points unresolved ({flow.rs_residual:.2e})", history)
    try:
        cond = float(np.linalg.cond(_fd_jacobian(lambda zz: evaluate(zz)[0], z)))
    except (BlowUp, NoConvergence):
        cond = float("inf")
    _, _, psi, _ = lay.split(z)
    nu = float(np.sqrt(1.0 + psi @ psi))
    p = flow.p.with_values(flow.p.values / nu)
    ext = Extremal(flow.trajectory, p, -1.0 / nu, psi / nu)
    log.info("shooting converged: defect %.2e after %d evaluations", defect, len(history))
    return ShootingResult(ext, defect, len(history), history, cond)


# -----------------------------------------------------------------------------
# projected gradient
# -----------------------------------------------------------------------------


def control_gradient(problem: ControlProblem, traj: Trajectory, lin: Linearization | None = None) -> np.ndarray:
    """Ascent direction per cell: ``-(∂C/∂u_k) / width_k`` for the discretized cost.

    At scattered points this is exactly ``∂H/∂u`` at ``(q(r), u(r), p(σ(r)), -1)``.
    """
    lin = lin if lin is not None else Linearization(problem, traj)
    n, m = problem.n, problem.m
    pbar = adjoint_solve(problem, traj, np.zeros(n), -1.0, augmented=True, lin=lin)
    grid = traj.grid
    G = np.zeros((len(grid), m))
    for k, width, rs in iter_cells(traj.timescale, grid, traj.a, traj.b):
        t, uk = grid[k], traj.u.values[k]
        y = traj.q_bar(k)
        if rs:
            B = width * problem.jac_bar_u(y[:n], uk, t)
        else:
            F = lambda yy, tt: problem.f_bar(yy[:n], uk, tt)
            J = lambda yy, tt: problem.jac_bar(yy[:n], uk, tt)
            Fu = lambda yy, tt: problem.jac_bar_u(yy[:n], uk, tt)
            w2 = 0.5 * width
            k1 = F(y, t)
            y2 = y + w2 * k1
            k2 = F(y2, t + w2)
            y3 = y + w2 * k2
            k3 = F(y3, t + w2)
            y4 = y + width * k3
            d1 = Fu(y, t)
            d2 = J(y2, t + w2) @ (w2 * d1) + Fu(y2, t + w2)
            d3 = J(y3, t + w2) @ (w2 * d2) + Fu(y3, t + w2)
            d4 = J(y4, t + width) @ (width * d3) + Fu(y4, t + width)
            B = width / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4)
        G[k] = B.T @ pbar.values[k + 1] / width
    return G


def projected_gradient(problem: ControlProblem, u0, q_a=None, steps: int = 100, step_size: float = 0.5,
                       b: float | None = None, h: float = DEFAULT_H, tol: float = 1e-13, max_increases: int = 5):
    """Iterate ``u ← P_Ω(u + step ∂H/∂u)``; returns ``(control, cost history)``.

    Only the initial state may be constrained by the target: the final state
    must be free.  A rejected step (cost increase) is retried with half the
    step; ``max_increases`` consecutive rejections raise StepTooLarge.
    """
    if problem.terms.depends_on_q2:
        raise UnsupportedKind("projected gradient handles free final states only")
    omega = problem.omega
    proj = omega.project if omega.convex else omega.nearest
    u = control_on_grid(problem, u0, b, h)
    traj = simulate(problem, u, q_a, b, h)
    history = [traj.cost]
    step = step_size
    increases = 0
    for _ in range(steps):
        G = control_gradient(problem, traj)
        vals = u.values.copy()
        for k in range(len(vals) - 1):
            vals[k] = proj(vals[k] + step * G[k])
        vals[-1] = vals[-2]
        if np.max(np.abs(vals - u.values)) <= 1e-15:
            break
        cand_u = u.with_values(vals)
        cand = simulate(problem, cand_u, q_a, b, h)
        if cand.cost > history[-1] + tol:
            increases += 1
            if increases >= max_increases:
                raise StepTooLarge(f"cost increased {increases} times in a row")
            step *= 0.5
            continue
        increases = 0
        improvement = history[-1] - cand.cost
        u, traj = cand_u, cand
        history.append(cand.cost)
        if improvement <= tol:
            break
    return u, history
