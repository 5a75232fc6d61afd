"""Optimal control problems on time scales."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, NotInScale, TermError, UnsupportedKind
from .geometry import ConstraintSet, constraint_set_from_json, target_from_json
from .terms import TermSystem
from .timescale import TimeScale, build_timescale


@dataclass(eq=False)
class ControlProblem:
    """Data of a Mayer-Lagrange problem ``min ∫ f⁰`` under ``q^Δ = f(q, u, t)``.

    ``dynamics``, ``running_cost`` and ``boundary`` are term-language inputs
    (strings or syntax trees).  ``b`` is the final time; with
    ``free_time=True`` it is only the nominal horizon (an initial guess or
    the upper end of the search).  ``q_a`` is the initial state used when a
    caller does not provide one; ``parameter`` is the value of the optional
    parameter block ``lam``.
    """

    timescale: TimeScale
    n: int
    m: int
    dynamics: list
    running_cost: object
    boundary: list
    target: ConstraintSet
    omega: ConstraintSet
    b: float
    free_time: bool = False
    q_a: np.ndarray | None = None
    parameter: np.ndarray | None = None
    name: str = "problem"
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.omega.dim != self.m:
            raise DimensionMismatch(f"omega has dimension {self.omega.dim}, controls {self.m}")
        if not self.target.convex:
            raise UnsupportedKind(f"target {self.target.kind} is not convex")
        self.b = self.timescale.snap(float(self.b))
        if self.b <= self.timescale.a:
            raise NotInScale("final time must be after the initial time")
        if self.q_a is not None:
            self.q_a = np.asarray(self.q_a, float).reshape(self.n)
        if self.parameter is not None:
            self.parameter = np.atleast_1d(np.asarray(self.parameter, float))
        if self.terms.j != self.target.dim:
            raise DimensionMismatch(f"boundary map has {self.terms.j} components, target dimension {self.target.dim}")

    @cached_property
    def terms(self) -> TermSystem:
        n_lam = 0 if self.parameter is None else len(self.parameter)
        key = (self.n, self.m, repr(self.dynamics), repr(self.running_cost), repr(self.boundary), n_lam)
        if key not in _TERM_CACHE:
            _TERM_CACHE[key] = TermSystem(self.n, self.m, self.dynamics, self.running_cost, self.boundary, n_lam)
        return _TERM_CACHE[key]

    @property
    def a(self) -> float:
        return self.timescale.a

    @property
    def j(self) -> int:
        return self.terms.j

    @property
    def lam(self) -> np.ndarray:
        return np.zeros(0) if self.parameter is None else self.parameter

    # -- numeric evaluation (parameter bound) ----------------------------------

    def f(self, q, u, t):
        return self.terms.f(q, u, t, self.lam)

    def f0(self, q, u, t) -> float:
        return float(self.terms.f0(q, u, t, self.lam))

    def f_bar(self, q, u, t) -> np.ndarray:
        """Augmented field ``(f, f⁰)``."""
        return np.append(self.f(q, u, t), self.f0(q, u, t))

    def jac_bar(self, q, u, t) -> np.ndarray:
        """``∂(f, f⁰)/∂(q, q⁰)``; the last column is zero."""
        n = self.n
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = self.terms.f_q(q, u, t, self.lam)
        J[n, :n] = self.terms.f0_q(q, u, t, self.lam)
        return J

    def jac_bar_u(self, q, u, t) -> np.ndarray:
        return np.vstack([self.terms.f_u(q, u, t, self.lam), self.terms.f0_u(q, u, t, self.lam)[None, :]])

    def g(self, qa, qb):
        return self.terms.g(qa, qb, self.lam)

    def with_parameter(self, lam) -> "ControlProblem":
        return replace(self, parameter=np.atleast_1d(np.asarray(lam, float)))

    def with_final_time(self, b: float) -> "ControlProblem":
        return replace(self, b=float(b))

    # -- serialization ----------------------------------------------------------

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "timescale": self.timescale.to_json(),
            "n": self.n,
            "m": self.m,
            "dynamics": list(self.dynamics),
            "running_cost": self.running_cost,
            "boundary": list(self.boundary),
            "target": self.target.to_json(),
            "omega": self.omega.to_json(),
            "final_time": {"mode": "free" if self.free_time else "fixed", "b": self.b},
        }
        if self.q_a is not None:
            out["q_a"] = self.q_a.tolist()
        if self.parameter is not None:
            out["parameter"] = self.parameter.tolist()
        return out


# compiled term systems are pure functions of the term inputs
_TERM_CACHE: dict = {}

_JSON_KEYS = {
    "name", "timescale", "n", "m", "dynamics", "running_cost", "boundary",
    "target", "omega", "final_time", "q_a", "parameter",
}


def problem_from_json(data: dict) -> ControlProblem:
    """Build a problem from its JSON form or a ``{"builtin": name}`` reference."""
    if not isinstance(data, dict) or not data:
        raise TermError("problem description is empty")
    if "builtin" in data:
        from .registry import get_problem

        extra = set(data) - {"builtin"}
        if extra:
            raise TermError(f"unexpected keys next to builtin: {sorted(extra)}")
        return get_problem(data["builtin"])
    unknown = set(data) - _JSON_KEYS
    if unknown:
        raise TermError(f"unknown problem keys {sorted(unknown)}")
    try:
        ft = data["final_time"]
        return ControlProblem(
            timescale=build_timescale(data["timescale"]["segments"]),
            n=int(data["n"]),
            m=int(data["m"]),
            dynamics=list(data["dynamics"]),
            running_cost=data["running_cost"],
            boundary=list(data["boundary"]),
            target=target_from_json(data["target"]),
            omega=constraint_set_from_json(data["omega"]),
            b=float(ft["b"]),
            free_time=ft.get("mode", "fixed") == "free",
            q_a=data.get("q_a"),
            parameter=data.get("parameter"),
            name=data.get("name", "problem"),
        )
    except KeyError as exc:
        raise TermError(f"problem description misses {exc}") from None
