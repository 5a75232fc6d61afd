"""Pointwise maximization of the Hamiltonian over the control set.

The checker must never overstate optimality, so closed forms are used
whenever the structure of ``u ↦ H`` and of ``Ω`` allows, and a seeded
multistart search otherwise.  A gap computed from the multistart result is
a lower bound on the true gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import MaximizationFailed
from .geometry import Ball, Box, FiniteSet, FullSpace, Singleton
from .problem import ControlProblem

N_STARTS = 64
N_POLISH = 8
MAX_ITER = 200
TIE_TOL = 1e-12


@dataclass
class MaxResult:
    v: np.ndarray
    value: float
    tie: bool = False
    method: str = ""


class HamiltonianSlice:
    """``v ↦ H(q, v, p, p0, t)`` with its gradient and Hessian in ``v``."""

    def __init__(self, problem: ControlProblem, q, p, p0: float, t: float):
        self.problem, self.q, self.p, self.p0, self.t = problem, np.asarray(q, float), np.asarray(p, float), float(p0), t
        self._lam = problem.lam

    def value(self, v) -> float:
        pr = self.problem
        return float(self.p @ pr.f(self.q, v, self.t) + self.p0 * pr.f0(self.q, v, self.t))

    def grad(self, v) -> np.ndarray:
        tm = self.problem.terms
        return tm.f_u(self.q, v, self.t, self._lam).T @ self.p + self.p0 * tm.f0_u(self.q, v, self.t, self._lam)

    def hess(self, v) -> np.ndarray:
        tm = self.problem.terms
        return np.einsum("i,ijk->jk", self.p, tm.f_uu(self.q, v, self.t, self._lam)) + self.p0 * tm.f0_uu(
            self.q, v, self.t, self._lam
        )


def maximize_hamiltonian(problem: ControlProblem, q, p, p0: float, t: float, seed: int = 0) -> MaxResult:
    """``argmax_{v ∈ Ω} H(q, v, p, p0, t)``."""
    omega = problem.omega
    H = HamiltonianSlice(problem, q, p, p0, t)
    m = problem.m
    if isinstance(omega, Singleton):
        return MaxResult(omega.point.copy(), H.value(omega.point), method="singleton")
    if isinstance(omega, FiniteSet):
        vals = np.array([H.value(v) for v in omega.points])
        best = int(np.argmax(vals))
        tie = int(np.sum(vals >= vals[best] - TIE_TOL * max(1.0, abs(vals[best])))) > 1
        return MaxResult(omega.points[best].copy(), float(vals[best]), tie, "enumerate")
    deg = problem.terms.u_degree
    zero = np.zeros(m)
    if deg is not None and deg <= 1:
        return _affine(omega, H, H.grad(zero))
    if deg == 2:
        Q = H.hess(zero)
        c = H.grad(zero)
        res = _quadratic(omega, H, Q, c)
        if res is not None:
            return res
    return _multistart(omega, H, seed)


def _affine(omega, H, g) -> MaxResult:
    gn = np.linalg.norm(g)
    tiny = TIE_TOL * max(1.0, gn)
    if isinstance(omega, Box):
        v = np.empty(omega.dim)
        tie = False
        for i, gi in enumerate(g):
            if gi > tiny:
                v[i] = omega.upper[i]
            elif gi < -tiny:
                v[i] = omega.lower[i]
            else:
                tie = tie or omega.upper[i] > omega.lower[i]
                v[i] = omega.lower[i] if np.isfinite(omega.lower[i]) else (omega.upper[i] if np.isfinite(omega.upper[i]) else 0.0)
        if not np.all(np.isfinite(v)):
            raise MaximizationFailed("Hamiltonian is unbounded above on Ω")
        return MaxResult(v, H.value(v), tie, "affine-box")
    if isinstance(omega, Ball):
        if gn <= tiny:
            return MaxResult(omega.center.copy(), H.value(omega.center), True, "affine-ball")
        v = omega.center + omega.radius * g / gn
        return MaxResult(v, H.value(v), False, "affine-ball")
    if isinstance(omega, FullSpace):
        if gn > tiny:
            raise MaximizationFailed("Hamiltonian is unbounded above on Ω")
        v = np.zeros(omega.dim)
        return MaxResult(v, H.value(v), True, "affine-free")
    return _multistart(omega, H, 0)


def _quadratic(omega, H, Q, c) -> MaxResult | None:
    """``H(v) = H(0) + c·v + ½ vᵀQv`` on simple sets; None when no closed form applies."""
    Q = 0.5 * (Q + Q.T)
    eig = Q[0] if Q.shape == (1, 1) else np.linalg.eigvalsh(Q)
    if np.all(np.abs(eig) <= 1e-14 * max(1.0, float(np.max(np.abs(c), initial=0.0)))):
        return _affine(omega, H, c)
    scale = max(1.0, float(np.max(np.abs(eig))))
    if np.all(eig < -1e-12 * scale):
        v_free = -c / Q[0] if Q.shape == (1, 1) else np.linalg.solve(Q, -c)
        if isinstance(omega, FullSpace):
            return MaxResult(v_free, H.value(v_free), False, "concave-free")
        if isinstance(omega, Box) and np.allclose(Q, np.diag(np.diag(Q))):
            v = np.clip(v_free, omega.lower, omega.upper)
            return MaxResult(v, H.value(v), False, "concave-box")
        if isinstance(omega, (Box, Ball)):
            return _polish_convex(omega, H, [omega.project(v_free)], "concave")
        return None
    if np.all(eig > 1e-12 * scale) or np.all(eig >= -1e-12 * scale):
        if isinstance(omega, Box) and omega.bounded:
            verts = omega.vertices()
            vals = np.array([H.value(v) for v in verts])
            best = int(np.argmax(vals))
            tie = int(np.sum(vals >= vals[best] - TIE_TOL * max(1.0, abs(vals[best])))) > 1
            return MaxResult(verts[best].copy(), float(vals[best]), tie, "convex-vertices")
        if isinstance(omega, FullSpace) and np.any(eig > 1e-12 * scale):
            raise MaximizationFailed("Hamiltonian is unbounded above on Ω")
    return None


def _polish_convex(omega, H, starts, label) -> MaxResult:
    best = None
    for x0 in starts:
        if isinstance(omega, Box):
            bounds = list(zip(np.where(np.isfinite(omega.lower), omega.lower, None), np.where(np.isfinite(omega.upper), omega.upper, None)))
            res = minimize(lambda v: -H.value(v), x0, jac=lambda v: -H.grad(v), method="L-BFGS-B", bounds=bounds, options={"maxiter": MAX_ITER})
            v = omega.project(res.x)
        else:
            cons = [{"type": "ineq", "fun": lambda v: omega.radius ** 2 - np.sum((v - omega.center) ** 2)}]
            res = minimize(lambda v: -H.value(v), x0, jac=lambda v: -H.grad(v), method="SLSQP", constraints=cons, options={"maxiter": MAX_ITER})
            v = omega.project(res.x)
        val = H.value(v)
        if np.isfinite(val) and (best is None or val > best.value):
            best = MaxResult(v, val, False, label)
    if best is None:
        raise MaximizationFailed("local search produced no finite value")
    return best


def _multistart(omega, H, seed: int) -> MaxResult:
    rng = np.random.default_rng(seed)
    pts = omega.sample(rng, N_STARTS)
    vals = np.array([H.value(v) for v in pts])
    if not np.any(np.isfinite(vals)):
        raise MaximizationFailed("no finite Hamiltonian value among the starts")
    vals[~np.isfinite(vals)] = -np.inf
    order = np.argsort(-vals)[:N_POLISH]
    best = MaxResult(pts[order[0]].copy(), float(vals[order[0]]), False, "multistart")
    if isinstance(omega, (Box, Ball)):
        pol = _polish_convex(omega, H, [pts[i] for i in order], "multistart")
        if pol.value > best.value:
            best = pol
        return best
    # projected ascent through the nearest-point map for the other kinds
    for i in order:
        v = pts[i].copy()
        val = vals[i]
        step = 0.1
        for _ in range(MAX_ITER):
            cand = omega.nearest(v + step * H.grad(v))
            cv = H.value(cand)
            if cv > val + 1e-15:
                v, val = cand, cv
            else:
                step *= 0.5
                if step < 1e-12:
                    break
        if val > best.value:
            best = MaxResult(v, float(val), False, "multistart")
    return best
