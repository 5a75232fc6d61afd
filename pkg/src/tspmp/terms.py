"""A small closed term language for dynamics, running costs and boundary maps.

Terms are sympy expressions restricted to ``+ - * /``, integer powers,
``exp``, ``log``, ``sin`` and ``cos`` over the variables of the problem, so
that every term is C¹ where defined and its Jacobians are exact.  Terms can
be given as strings (``"u0 - q0"``) or as JSON syntax trees::

    {"op": "-", "args": [{"var": "u0"}, {"var": "q0"}]}

Variables: ``q0..`` (state), ``u0..`` (control), ``t`` (time), ``lam0..``
(parameters) and, for boundary maps only, ``qa0..``/``qb0..`` (initial and
final state).
"""

from __future__ import annotations

from functools import reduce

import numpy as np
import sympy as sp

from .errors import TermError

_FUNCS = {"exp": sp.exp, "log": sp.log, "sin": sp.sin, "cos": sp.cos}
_ALLOWED_FUNCS = (sp.exp, sp.log, sp.sin, sp.cos)


def symbols(prefix: str, k: int) -> list[sp.Symbol]:
    return [sp.Symbol(f"{prefix}{i}", real=True) for i in range(k)]


T_SYM = sp.Symbol("t", real=True)


def _from_ast(node, env: dict) -> sp.Expr:
    if isinstance(node, bool):
        raise TermError("booleans are not terms")
    if isinstance(node, (int, float)):
        return sp.nsimplify(node) if float(node).is_integer() else sp.Float(node)
    if isinstance(node, str):
        return _from_string(node, env)
    if not isinstance(node, dict):
        raise TermError(f"cannot read term node {node!r}")
    if "var" in node:
        name = node["var"]
        if name not in env:
            raise TermError(f"unknown variable {name!r}")
        return env[name]
    if "const" in node:
        return _from_ast(float(node["const"]), env)
    op = node.get("op")
    args = [_from_ast(a, env) for a in node.get("args", [])]
    if op == "+":
        return reduce(lambda x, y: x + y, args, sp.Integer(0))
    if op == "*":
        return reduce(lambda x, y: x * y, args, sp.Integer(1))
    if op == "-":
        if len(args) == 1:
            return -args[0]
        if len(args) == 2:
            return args[0] - args[1]
    if op == "/" and len(args) == 2:
        return args[0] / args[1]
    if op == "pow" and len(args) == 2:
        expo = args[1]
        if not expo.is_Integer:
            raise TermError("pow needs an integer exponent")
        return args[0] ** expo
    if op in _FUNCS and len(args) == 1:
        return _FUNCS[op](args[0])
    raise TermError(f"bad operator {op!r} with {len(args)} arguments")


def _from_string(text: str, env: dict) -> sp.Expr:
    try:
        expr = sp.sympify(text, locals={**env, **_FUNCS}, rational=False)
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise TermError(f"cannot parse term {text!r}: {exc}") from None
    return expr


def _validate(expr: sp.Expr, allowed: set) -> None:
    if isinstance(expr, sp.Symbol):
        if expr not in allowed:
            raise TermError(f"variable {expr} is not allowed here")
        return
    if isinstance(expr, sp.Number):
        if not expr.is_real or not expr.is_finite:
            raise TermError(f"constant {expr} is not a finite real")
        return
    if isinstance(expr, sp.NumberSymbol):
        return
    if isinstance(expr, (sp.Add, sp.Mul)):
        pass
    elif isinstance(expr, sp.Pow):
        if not expr.exp.is_Integer:
            raise TermError(f"non-integer power in {expr}")
    elif isinstance(expr, _ALLOWED_FUNCS):
        pass
    else:
        raise TermError(f"operation {type(expr).__name__} is outside the term language")
    for arg in expr.args:
        _validate(arg, allowed)


def parse_term(node, env: dict) -> sp.Expr:
    """Read and validate one term against the variables of ``env``."""
    expr = _from_ast(node, env)
    if not isinstance(expr, sp.Expr):
        raise TermError(f"{node!r} is not an expression")
    _validate(expr, set(env.values()))
    return expr


def term_to_string(expr: sp.Expr) -> str:
    return sp.sstr(expr)


def _lambdify(args, exprs, shape):
    fn = sp.lambdify(args, list(np.ravel(np.asarray(exprs, dtype=object))), modules="numpy")

    def call(*vals):
        out = np.array(fn(*vals), dtype=float)
        return out.reshape(shape)

    return call


def polynomial_degree(expr: sp.Expr, gens) -> int | None:
    """Total degree in ``gens`` when ``expr`` is polynomial in them, else None."""
    if not gens:
        return 0
    try:
        poly = sp.Poly(expr, *gens)
    except sp.PolynomialError:
        return None
    for coeff in poly.coeffs():
        if coeff.free_symbols & set(gens):
            return None
    return poly.total_degree()


class TermSystem:
    """Compiled numeric callables and exact Jacobians for one problem.

    Every callable takes numpy vectors ``(q, u, t, lam)`` (or
    ``(qa, qb, lam)`` for the boundary map) and returns fresh float arrays.
    """

    def __init__(self, n: int, m: int, dynamics, running_cost, boundary, n_lam: int = 0):
        self.n, self.m, self.n_lam = int(n), int(m), int(n_lam)
        self.q = symbols("q", n)
        self.u = symbols("u", m)
        self.lam = symbols("lam", n_lam)
        self.qa = symbols("qa", n)
        self.qb = symbols("qb", n)
        env = {s.name: s for s in self.q + self.u + self.lam}
        env["t"] = T_SYM
        benv = {s.name: s for s in self.qa + self.qb + self.lam}
        dynamics = list(dynamics)
        boundary = list(boundary)
        if len(dynamics) != n:
            raise TermError(f"{len(dynamics)} dynamics terms for state dimension {n}")
        self.f_expr = [parse_term(e, env) for e in dynamics]
        self.f0_expr = parse_term(running_cost, env)
        self.g_expr = [parse_term(e, benv) for e in boundary]
        self.j = len(self.g_expr)
        self._compile()

    def _compile(self):
        q, u, lam, t = self.q, self.u, self.lam, T_SYM
        n, m, j, nl = self.n, self.m, self.j, self.n_lam
        args = (q, u, t, lam)
        F = sp.Matrix(self.f_expr)
        f0 = sp.Matrix([self.f0_expr])
        G = sp.Matrix(self.g_expr)
        jac = lambda M, v: M.jacobian(v) if v else sp.zeros(M.shape[0], 0)
        self.f = _lambdify(args, F, (n,))
        self.f0 = _lambdify(args, f0, ())
        self.f_q = _lambdify(args, jac(F, q), (n, n))
        self.f_u = _lambdify(args, jac(F, u), (n, m))
        self.f_lam = _lambdify(args, jac(F, lam), (n, nl))
        self.f0_q = _lambdify(args, jac(f0, q), (n,))
        self.f0_u = _lambdify(args, jac(f0, u), (m,))
        self.f0_lam = _lambdify(args, jac(f0, lam), (nl,))
        self.f_uu = _lambdify(args, [sp.hessian(e, u) if u else sp.zeros(0, 0) for e in self.f_expr], (n, m, m))
        self.f0_uu = _lambdify(args, sp.hessian(self.f0_expr, u) if u else sp.zeros(0, 0), (m, m))
        bargs = (self.qa, self.qb, lam)
        self.g = _lambdify(bargs, G, (j,))
        self.g_q1 = _lambdify(bargs, jac(G, self.qa), (j, n))
        self.g_q2 = _lambdify(bargs, jac(G, self.qb), (j, n))
        self.g_lam = _lambdify(bargs, jac(G, lam), (j, nl))
        all_f = self.f_expr + [self.f0_expr]
        self.autonomous = not any(T_SYM in e.free_symbols for e in all_f)
        degs = [polynomial_degree(e, u) for e in all_f]
        self.u_degree = None if any(d is None for d in degs) else max(degs)
        self.depends_on_q2 = any(s in G.free_symbols for s in self.qb)

    def describe(self) -> dict:
        return {
            "dynamics": [term_to_string(e) for e in self.f_expr],
            "running_cost": term_to_string(self.f0_expr),
            "boundary": [term_to_string(e) for e in self.g_expr],
        }
