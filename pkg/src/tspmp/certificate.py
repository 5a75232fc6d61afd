"""Hamiltonian, adjoint and the necessary-condition certificate.

All Hamiltonian-based quantities at a time ``t`` use the adjoint at
``σ(t)``; at the final time ``p^σ(b) := p(b)``.  Residuals are divided by
``ν = sqrt(p0² + |ψ|²)`` so that verdicts do not depend on the arbitrary
positive scaling of the multipliers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .calculus import GridFunction, integrate_cells, iter_cells
from .dynamics import TOL_TARGET, Trajectory, require_in_target
from .errors import DimensionMismatch, NontrivialityViolation, NotApplicable, NotRD, NotRS, NotInTarget
from .geometry import in_orthogonal_cone, stable_cone
from .maximize import HamiltonianSlice, maximize_hamiltonian
from .problem import ControlProblem
from .timescale import SNAP_TOL
from .variations import Linearization

log = logging.getLogger(__name__)

TOL_PMP = 1e-6
TOL_NONTRIVIAL = 1e-9
OPP_SAMPLES = np.concatenate([[0.0], np.geomspace(1e-6, 1e3, 200)])


@dataclass(frozen=True, eq=False)
class Extremal:
    """Candidate ``(q, u, p, p0, ψ)`` on ``[a, b]``."""

    trajectory: Trajectory
    p: GridFunction
    p0: float
    psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "psi", np.atleast_1d(np.asarray(self.psi, float)))
        object.__setattr__(self, "p0", float(self.p0))
        if not np.array_equal(self.p.grid, self.trajectory.grid):
            raise DimensionMismatch("adjoint and trajectory must share a grid")

    @property
    def grid(self) -> np.ndarray:
        return self.trajectory.grid

    @property
    def a(self) -> float:
        return self.trajectory.a

    @property
    def b(self) -> float:
        return self.trajectory.b

    @property
    def nu(self) -> float:
        return float(np.sqrt(self.p0 ** 2 + self.psi @ self.psi))

    def p_sigma(self, k: int) -> np.ndarray:
        """Adjoint at ``σ(t_k)`` (the next grid point after a scattered one)."""
        ts = self.trajectory.timescale
        if k < len(self.grid) - 1 and ts.is_rs(self.grid[k]):
            return self.p.values[k + 1]
        return self.p.values[k]

    def scaled(self, c: float) -> "Extremal":
        return Extremal(self.trajectory, self.p.with_values(c * self.p.values), c * self.p0, c * self.psi)

    def to_json(self) -> dict:
        tr = self.trajectory
        return {
            "grid": tr.grid.tolist(),
            "q": tr.q.values.tolist(),
            "q0": tr.q0.values[:, 0].tolist(),
            "u": tr.u.values.tolist(),
            "p": self.p.values.tolist(),
            "p0": self.p0,
            "psi": self.psi.tolist(),
        }


def hamiltonian(problem: ControlProblem, q, u, p, p0: float, t: float) -> float:
    """``H = ⟨p, f⟩ + p0 f⁰``."""
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    if q.shape != (problem.n,) or p.shape != (problem.n,) or np.shape(u) != (problem.m,):
        raise DimensionMismatch("hamiltonian arguments have the wrong dimensions")
    return float(p @ problem.f(q, u, t) + p0 * problem.f0(q, u, t))


def hamiltonian_grad_u(problem, q, u, p, p0, t) -> np.ndarray:
    return HamiltonianSlice(problem, q, p, p0, t).grad(np.asarray(u, float))


def hamiltonian_grad_q(problem, q, u, p, p0, t) -> np.ndarray:
    tm, lam = problem.terms, problem.lam
    return tm.f_q(q, u, t, lam).T @ p + p0 * tm.f0_q(q, u, t, lam)


def hamiltonian_grad_lam(problem, q, u, p, p0, t) -> np.ndarray:
    tm, lam = problem.terms, problem.lam
    return tm.f_lam(q, u, t, lam).T @ p + p0 * tm.f0_lam(q, u, t, lam)


# -----------------------------------------------------------------------------
# adjoint
# -----------------------------------------------------------------------------


def adjoint_solve(problem: ControlProblem, traj: Trajectory, p_b, p0: float, augmented: bool = False,
                  lin: Linearization | None = None) -> GridFunction:
    """Backward shifted adjoint from ``p(b) = p_b``.

    At a scattered point ``p(r) = p(σ(r)) + μ(r) [f_q^T p(σ(r)) + p0 f⁰_q]``;
    on dense cells the transpose of the RK4 tangent map is applied, which is
    the exact discrete adjoint of the forward scheme.
    """
    p_b = np.asarray(p_b, float).reshape(problem.n)
    lin = lin if lin is not None else Linearization(problem, traj)
    pbar = lin.adjoint(np.append(p_b, p0))
    if augmented:
        return pbar
    return GridFunction(pbar.grid, pbar.values[:, : problem.n])


def terminal_adjoint(problem: ControlProblem, boundary, psi, p0: float = -1.0):
    """``(p(a), p(b)) = (-∂g/∂q1^T ψ, ∂g/∂q2^T ψ)`` at ``(q(a), q(b))``."""
    q_a, q_b = (np.asarray(x, float) for x in boundary)
    psi = np.atleast_1d(np.asarray(psi, float))
    if psi.shape != (problem.j,) or q_a.shape != (problem.n,) or q_b.shape != (problem.n,):
        raise DimensionMismatch("terminal_adjoint arguments have the wrong dimensions")
    lam = problem.lam
    G1 = problem.terms.g_q1(q_a, q_b, lam)
    G2 = problem.terms.g_q2(q_a, q_b, lam)
    return -G1.T @ psi, G2.T @ psi


@dataclass
class MultiplierFit:
    extremal: Extremal
    residual: float
    null_dim: int


def derive_multipliers(problem: ControlProblem, traj: Trajectory, tol: float = 1e-10) -> MultiplierFit:
    """Multipliers ``(p0, ψ)`` consistent with a trajectory, normalized to ``p0 = -1``.

    The adjoint is linear in ``(ψ, p0)``; stacking the initial transversality
    condition, the stationarity ``⟨∂H/∂u, l⟩ = 0`` along every lineality
    direction ``l`` of the stable cone at scattered points, and the
    orthogonality of ``ψ`` to the directions along which the target extends
    gives a homogeneous linear system whose null space is returned.
    """
    n, j = problem.n, problem.j
    lin = Linearization(problem, traj)
    ts = traj.timescale
    q_a, q_b = traj.q.values[0], traj.q.values[-1]
    G1 = problem.terms.g_q1(q_a, q_b, problem.lam)
    G2 = problem.terms.g_q2(q_a, q_b, problem.lam)
    basis = []
    for i in range(j + 1):
        e = np.zeros(j + 1)
        e[i] = 1.0
        psi, p0 = e[:j], e[j]
        basis.append((psi, p0, adjoint_solve(problem, traj, G2.T @ psi, p0, lin=lin)))
    rows = []
    # p(a) + G1^T psi = 0
    for r in range(n):
        rows.append([b[2].values[0, r] + (G1.T @ b[0])[r] for b in basis])
    for k, t in enumerate(traj.grid[:-1]):
        if not ts.is_rs(t):
            continue
        u = traj.u.values[k]
        cone = stable_cone(problem.omega, u)
        for l in cone.lineality:
            rows.append([hamiltonian_grad_u(problem, traj.q.values[k], u, b[2].values[k + 1], b[1], t) @ l for b in basis])
    gval = problem.target.project(problem.g(q_a, q_b))
    tcone = stable_cone(problem.target, gval)
    for l in tcone.lineality:
        rows.append([l @ b[0] for b in basis])
    M = np.array(rows).reshape(-1, j + 1)
    _, s, vt = np.linalg.svd(M) if M.size else (None, np.zeros(0), np.eye(j + 1))
    s_full = np.concatenate([s, np.zeros(j + 1 - len(s))])
    null = vt[s_full <= tol * max(1.0, s_full.max(initial=0.0))] if M.size else vt
    if len(null) == 0:
        null = vt[-1:]
    residual = float(np.linalg.norm(M @ null[0])) if M.size else 0.0
    # prefer the normal multiplier p0 = -1 when the null space allows it
    p0_col = null[:, j]
    if np.linalg.norm(p0_col) > 1e-12:
        coef = -p0_col / (p0_col @ p0_col)
        vec = coef @ null
    else:
        vec = null[0] / np.linalg.norm(null[0][:j])
        if vec[j] > 0:
            vec = -vec
    psi, p0 = vec[:j], vec[j]
    p = adjoint_solve(problem, traj, G2.T @ psi, p0, lin=lin)
    return MultiplierFit(Extremal(traj, p, p0, psi), residual, len(null))


# -----------------------------------------------------------------------------
# individual conditions
# -----------------------------------------------------------------------------


def _require_nontrivial(ext: Extremal, tol: float = TOL_NONTRIVIAL) -> float:
    nu2 = ext.p0 ** 2 + float(ext.psi @ ext.psi)
    if nu2 < tol:
        raise NontrivialityViolation(f"|p0|² + |ψ|² = {nu2:.3g} is below {tol:g}")
    return float(np.sqrt(nu2))


@dataclass
class RSCheck:
    r: float
    grad_u: np.ndarray
    directions: list
    residuals: np.ndarray
    passed: bool

    @property
    def worst(self) -> float:
        return float(self.residuals.max(initial=0.0))


def check_rs_condition(problem, ext: Extremal, r: float, tol: float = TOL_PMP) -> RSCheck:
    """``⟨∂H/∂u, v - u*(r)⟩ ≤ 0`` over the stable cone at ``u*(r)``."""
    ts = problem.timescale
    if not ts.is_rs(r) or r >= ext.b - SNAP_TOL:
        raise NotRS(f"{r} is not a right-scattered point of [a, b*[")
    nu = _require_nontrivial(ext)
    k = ext.trajectory.q.index(r)
    u = ext.trajectory.u.values[k]
    cone = stable_cone(problem.omega, u)
    grad = hamiltonian_grad_u(problem, ext.trajectory.q.values[k], u, ext.p_sigma(k), ext.p0, r)
    dirs = cone.directions()
    res = np.array([grad @ d for d in dirs]) / nu
    return RSCheck(float(r), grad, dirs, res, bool(np.all(res <= tol)))


@dataclass
class RDCheck:
    s: float
    max_h: float
    h_star: float
    argmax: np.ndarray
    gap: float
    passed: bool


def check_rd_maximization(problem, ext: Extremal, s: float, tol: float = TOL_PMP, seed: int = 0) -> RDCheck:
    ts = problem.timescale
    if ts.is_rs(s) or s >= ext.b - SNAP_TOL:
        raise NotRD(f"{s} is not a right-dense point of [a, b*[")
    nu = _require_nontrivial(ext)
    k = ext.trajectory.q.index(s)
    q, u = ext.trajectory.q.values[k], ext.trajectory.u.values[k]
    p = ext.p_sigma(k)
    best = maximize_hamiltonian(problem, q, p, ext.p0, s, seed)
    h_star = hamiltonian(problem, q, u, p, ext.p0, s)
    gap = max(best.value - h_star, 0.0) / nu
    return RDCheck(float(s), best.value, h_star, best.v, gap, gap <= tol)


@dataclass
class TransversalityCheck:
    defect_a: float
    defect_b: float
    cone_ok: bool
    passed: bool


def check_transversality(problem, ext: Extremal, tol: float = TOL_PMP, tol_target: float = TOL_TARGET) -> TransversalityCheck:
    nu = _require_nontrivial(ext)
    tr = ext.trajectory
    gval = require_in_target(problem, tr, tol_target)
    pa, pb = terminal_adjoint(problem, (tr.q.values[0], tr.q.values[-1]), ext.psi, ext.p0)
    da = float(np.linalg.norm(ext.p.values[0] - pa)) / nu
    db = float(np.linalg.norm(ext.p.values[-1] - pb)) / nu
    cone_ok = in_orthogonal_cone(problem.target, gval, -ext.psi / nu)
    return TransversalityCheck(da, db, cone_ok, da <= tol and db <= tol and cone_ok)


def max_hamiltonian_at(problem, ext: Extremal, k: int, seed: int = 0) -> float:
    tr = ext.trajectory
    return maximize_hamiltonian(problem, tr.q.values[k], ext.p_sigma(k), ext.p0, tr.grid[k], seed).value


def _interior_final_time(problem, ext) -> bool:
    return problem.timescale.is_interior(ext.b)


def check_free_time(problem, ext: Extremal, seed: int = 0) -> float:
    """``max_v H`` at ``b*`` (normalized); NotApplicable unless free and interior."""
    nu = _require_nontrivial(ext)
    value = max_hamiltonian_at(problem, ext, len(ext.grid) - 1, seed) / nu
    if not problem.free_time:
        raise NotApplicable("final time is fixed", value)
    if not _interior_final_time(problem, ext):
        raise NotApplicable(f"b* = {ext.b} is not interior to the time scale", value)
    return value


def _hamiltonian_cells(problem, ext: Extremal, grad_lam: bool = False):
    """Left/right end values of ``H`` (or ``∂H/∂λ``) on every grid cell of ``[a, b*[``."""
    tr = ext.trajectory
    fn = hamiltonian_grad_lam if grad_lam else hamiltonian
    left, right = [], []
    for k, width, rs in iter_cells(tr.timescale, tr.grid, ext.a, ext.b):
        uk = tr.u.values[k]
        left.append(np.atleast_1d(fn(problem, tr.q.values[k], uk, ext.p_sigma(k), ext.p0, tr.grid[k])))
        if rs:
            right.append(left[-1])
        else:
            right.append(np.atleast_1d(fn(problem, tr.q.values[k + 1], uk, ext.p.values[k + 1], ext.p0, tr.grid[k + 1])))
    pad = np.zeros_like(left[0])
    return np.array(left + [pad]), np.array(right + [pad])


def check_averaged_hamiltonian(problem, ext: Extremal) -> float:
    """``∫_{[a, b*[} H Δt`` (normalized) for autonomous free-time problems."""
    nu = _require_nontrivial(ext)
    if not problem.free_time:
        raise NotApplicable("final time is fixed", None)
    if not problem.terms.autonomous:
        raise NotApplicable("dynamics or cost depend on t", None)
    left, right = _hamiltonian_cells(problem, ext)
    value = float(integrate_cells(problem.timescale, ext.grid, left, right, ext.a, ext.b)[0]) / nu
    if not _interior_final_time(problem, ext):
        raise NotApplicable(f"b* = {ext.b} is not interior to the time scale", value)
    return value


def check_parameter_condition(problem, ext: Extremal, lam=None) -> np.ndarray:
    """``∫ ∂H/∂λ Δt + ⟨∂g/∂λ, ψ⟩`` (normalized)."""
    if lam is not None:
        problem = problem.with_parameter(lam)
    if problem.parameter is None:
        raise NotApplicable("the problem has no parameter block", None)
    nu = _require_nontrivial(ext)
    left, right = _hamiltonian_cells(problem, ext, grad_lam=True)
    integral = integrate_cells(problem.timescale, ext.grid, left, right, ext.a, ext.b)
    tr = ext.trajectory
    g_lam = problem.terms.g_lam(tr.q.values[0], tr.q.values[-1], problem.lam)
    return (integral + g_lam.T @ ext.psi) / nu


@dataclass
class OppCheck:
    r: float
    h_star: float
    min_h: float
    difference: float
    convex: bool


def check_opp_minimization(problem, ext: Extremal, r: float) -> OppCheck:
    """Compare ``H(u*(r))`` with ``min H`` sampled on the reflected stable cone."""
    tr = ext.trajectory
    k = tr.q.index(r)
    q, u = tr.q.values[k], tr.u.values[k]
    Hs = HamiltonianSlice(problem, q, ext.p_sigma(k), ext.p0, r)
    convex = problem.terms.u_degree is not None and problem.terms.u_degree <= 2 and bool(
        np.all(np.linalg.eigvalsh(0.5 * (Hs.hess(u) + Hs.hess(u).T)) >= -1e-12)
    )
    opp = stable_cone(problem.omega, u).opposite()
    h_star = Hs.value(u)
    vals = [h_star]
    for d in opp.directions():
        vals.extend(Hs.value(u + s * d) for s in OPP_SAMPLES)
    min_h = float(np.min(vals))
    return OppCheck(float(r), h_star, min_h, abs(h_star - min_h), convex)


# -----------------------------------------------------------------------------
# report
# -----------------------------------------------------------------------------

PASS, FAIL, NA = "pass", "fail", "not_applicable"


@dataclass
class PMPReport:
    nu: float
    tol_pmp: float
    rs: list = field(default_factory=list)
    rd: list = field(default_factory=list)
    transversality: TransversalityCheck | None = None
    free_time_value: float | None = None
    averaged_h: float | None = None
    parameter_defect: np.ndarray | None = None
    hamiltonian_table: list = field(default_factory=list)
    opp: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def worst_rd(self):
        if not self.rd:
            return None
        worst = max(self.rd, key=lambda c: c.gap)
        return worst.gap, worst.s

    @property
    def overall(self) -> str:
        vals = list(self.verdicts.values())
        if FAIL in vals:
            return FAIL
        if PASS in vals:
            return PASS
        return NA

    @property
    def exit_code(self) -> int:
        return {PASS: 0, FAIL: 2, NA: 3}[self.overall]

    def max_h(self, t: float) -> float:
        for row in self.hamiltonian_table:
            if abs(row["t"] - t) <= SNAP_TOL:
                return row["max_h"]
        raise KeyError(t)

    def to_json(self) -> dict:
        tv = self.transversality
        out = {
            "nu": self.nu,
            "tol_pmp": self.tol_pmp,
            "verdicts": dict(self.verdicts),
            "overall": self.overall,
            "rs": [
                {"r": c.r, "grad_u": c.grad_u.tolist(), "residuals": c.residuals.tolist(), "passed": c.passed}
                for c in self.rs
            ],
            "rd_worst": None if not self.rd else {"gap": self.worst_rd[0], "s": self.worst_rd[1]},
            "rd_failures": [{"s": c.s, "gap": c.gap} for c in self.rd if not c.passed],
            "rd_count": len(self.rd),
            "transversality": None if tv is None else {
                "defect_a": tv.defect_a, "defect_b": tv.defect_b, "cone_ok": tv.cone_ok, "passed": tv.passed,
            },
            "free_time_value": self.free_time_value,
            "averaged_hamiltonian": self.averaged_h,
            "parameter_defect": None if self.parameter_defect is None else np.asarray(self.parameter_defect).tolist(),
            "hamiltonian_table": self.hamiltonian_table,
            "caveats": [
                {"t": r["t"], "rs_max_gap": r["rs_max_gap"], "max_h": r["max_h"], "h_star": r["h_star"]}
                for r in self.hamiltonian_table if r.get("flag") == "EXPECTED"
            ],
            "opp": [{"r": o.r, "h_star": o.h_star, "min_h": o.min_h, "difference": o.difference, "convex": o.convex} for o in self.opp],
            "notes": list(self.notes),
        }
        return out


def certify(problem: ControlProblem, ext: Extremal, tol_pmp: float = TOL_PMP, seed: int = 0,
            tol_target: float = TOL_TARGET) -> PMPReport:
    """Evaluate every applicable necessary condition on a candidate extremal."""
    nu = _require_nontrivial(ext)
    rep = PMPReport(nu=nu, tol_pmp=tol_pmp)
    tr = ext.trajectory
    ts = tr.timescale
    if ext.p0 > 0:
        rep.notes.append("p0 > 0: the sign convention requires p0 <= 0")
    for k, t in enumerate(tr.grid[:-1]):
        if ts.is_rs(t):
            rep.rs.append(check_rs_condition(problem, ext, t, tol_pmp))
            rep.opp.append(check_opp_minimization(problem, ext, t))
        else:
            rep.rd.append(check_rd_maximization(problem, ext, t, tol_pmp, seed))
    rep.verdicts["rs_condition"] = NA if not rep.rs else (PASS if all(c.passed for c in rep.rs) else FAIL)
    rep.verdicts["rd_maximization"] = NA if not rep.rd else (PASS if all(c.passed for c in rep.rd) else FAIL)
    failed_rd = [c.s for c in rep.rd if not c.passed]
    if failed_rd:
        rep.notes.append(
            f"RD maximization fails at {len(failed_rd)} grid point(s), first at t={failed_rd[0]:.6g}; "
            "the condition is required only almost everywhere"
        )
    try:
        rep.transversality = check_transversality(problem, ext, tol_pmp, tol_target)
        rep.verdicts["transversality"] = PASS if rep.transversality.passed else FAIL
    except NotInTarget as exc:
        rep.verdicts["transversality"] = FAIL
        rep.notes.append(str(exc))
    rep.verdicts["nontriviality"] = PASS if nu ** 2 >= TOL_NONTRIVIAL else FAIL
    rep.verdicts["p0_sign"] = PASS if ext.p0 / nu <= tol_pmp else FAIL
    for name, fn, attr in (
        ("free_time", check_free_time, "free_time_value"),
        ("averaged_hamiltonian", check_averaged_hamiltonian, "averaged_h"),
    ):
        try:
            val = fn(problem, ext) if name != "free_time" else fn(problem, ext, seed)
            setattr(rep, attr, val)
            bound = tol_pmp * (ext.b - ext.a) if name == "averaged_hamiltonian" else tol_pmp
            rep.verdicts[name] = PASS if abs(val) <= bound else FAIL
        except NotApplicable as exc:
            setattr(rep, attr, exc.value)
            rep.verdicts[name] = NA
            rep.notes.append(f"{name}: not applicable ({exc})")
    if problem.parameter is not None:
        rep.parameter_defect = check_parameter_condition(problem, ext)
        rep.verdicts["parameter"] = PASS if np.linalg.norm(rep.parameter_defect) <= tol_pmp else FAIL
    else:
        rep.verdicts["parameter"] = NA
    # informational: maximized Hamiltonian along the whole grid, in the multipliers' own scaling
    for k, t in enumerate(tr.grid):
        row = {"t": float(t), "max_h": max_hamiltonian_at(problem, ext, k, seed)}
        if k < len(tr.grid) - 1:
            row["h_star"] = hamiltonian(problem, tr.q.values[k], tr.u.values[k], ext.p_sigma(k), ext.p0, t)
            if ts.is_rs(t):
                row["rs_max_gap"] = (row["max_h"] - row["h_star"]) / nu
                if row["rs_max_gap"] > tol_pmp:
                    row["flag"] = "EXPECTED"
        rep.hamiltonian_table.append(row)
    if any(r.get("flag") == "EXPECTED" for r in rep.hamiltonian_table):
        rep.notes.append("maximization gaps at right-scattered points are expected and do not count as violations")
    return rep
