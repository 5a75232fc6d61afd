"""Control-constraint geometry and convex targets.

Constraint sets answer three questions about a point ``v`` and a second
point ``v2``: is the segment ``v + α(v2 - v)`` inside the set for ``α``
accumulating at 0 (a *dense direction*), does that stay true for every
point of the set near ``v`` (a *stable* dense direction), and what is the
closed convex cone of vertex ``v`` spanned by the stable ones.  The
catalogued kinds answer in closed form; a sampling fallback exists for
anything else and is labelled as heuristic.

Convex kinds double as terminal targets: they provide the Euclidean
projection and the orthogonal (normal) cone test.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .errors import DimensionMismatch, NotInOmega, NotInTarget, UnsupportedKind

MEMBER_TOL = 1e-12
CONE_TOL = 1e-9

# sampling fallback parameters
DENSE_K = range(4, 41)
DENSE_K_TAIL = 20
DENSE_FRACTION = 0.9
STABLE_K = range(4, 21)
STABLE_SAMPLES = 64


def _vec(x, m=None) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if m is not None and x.shape != (m,):
        raise DimensionMismatch(f"expected a vector of dimension {m}, got shape {x.shape}")
    return x


# =============================================================================
# cones
# =============================================================================


@dataclass(frozen=True, eq=False)
class Cone:
    """Closed convex cone ``{vertex + Σ λ_i g_i + Σ μ_j l_j : λ ≥ 0}``.

    ``inequalities`` (rows ``a`` with ``a·(x - vertex) ≤ 0``) and
    ``equalities`` (rows ``e`` with ``e·(x - vertex) = 0``) give the same
    cone in constraint form; when both are empty and the cone is not the
    whole space, membership falls back to nonnegative least squares on the
    generators.
    """

    vertex: np.ndarray
    generators: tuple = ()
    lineality: tuple = ()
    inequalities: np.ndarray | None = None
    equalities: np.ndarray | None = None
    closed: bool = True

    @property
    def dim(self) -> int:
        return self.vertex.shape[0]

    def directions(self) -> list[np.ndarray]:
        """Test directions: every generator and both signs of every lineality vector."""
        out = [np.asarray(g, float) for g in self.generators]
        for l in self.lineality:
            l = np.asarray(l, float)
            out.extend([l, -l])
        return out

    def contains(self, x, tol: float = CONE_TOL) -> bool:
        d = _vec(x, self.dim) - self.vertex
        scale = max(1.0, float(np.linalg.norm(d)))
        if self.inequalities is not None or self.equalities is not None:
            ok = True
            if self.inequalities is not None and len(self.inequalities):
                ok &= bool(np.all(self.inequalities @ d <= tol * scale))
            if self.equalities is not None and len(self.equalities):
                ok &= bool(np.all(np.abs(self.equalities @ d) <= tol * scale))
            return ok
        cols = [np.asarray(g, float) for g in self.generators]
        for l in self.lineality:
            cols.extend([np.asarray(l, float), -np.asarray(l, float)])
        if not cols:
            return bool(np.linalg.norm(d) <= tol * scale)
        _, res = nnls(np.column_stack(cols), d)
        return bool(res <= tol * scale)

    def opposite(self) -> "Cone":
        """Point reflection about the vertex: ``{2v - x : x in cone}``."""
        return Cone(
            self.vertex,
            tuple(-np.asarray(g, float) for g in self.generators),
            self.lineality,
            None if self.inequalities is None else -self.inequalities,
            self.equalities,
            self.closed,
        )

    def equals(self, other: "Cone", tol: float = CONE_TOL) -> bool:
        if self.dim != other.dim or not np.allclose(self.vertex, other.vertex, atol=tol):
            return False
        return all(other.contains(self.vertex + d, tol) for d in self.directions()) and all(
            self.contains(other.vertex + d, tol) for d in other.directions()
        )

    def to_json(self) -> dict:
        return {
            "vertex": self.vertex.tolist(),
            "generators": [np.asarray(g).tolist() for g in self.generators],
            "lineality": [np.asarray(l).tolist() for l in self.lineality],
        }


def _null_space(M: np.ndarray, m: int, tol: float = 1e-10) -> np.ndarray:
    if M.size == 0:
        return np.eye(m)
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s.max() if s.size else 1.0)))
    return vt[rank:].T


def polyhedral_cone(vertex, inequalities=None, equalities=None) -> Cone:
    """Cone ``{x : A(x - v) ≤ 0, E(x - v) = 0}`` with generators enumerated.

    Extreme rays are found by brute force over subsets of active rows,
    which is fine for the small control dimensions this toolkit targets.
    """
    v = _vec(vertex)
    m = v.shape[0]
    A = np.zeros((0, m)) if inequalities is None else np.atleast_2d(np.asarray(inequalities, float))
    E = np.zeros((0, m)) if equalities is None else np.atleast_2d(np.asarray(equalities, float))
    lin = _null_space(np.vstack([A, E]), m)
    lineality = tuple(lin[:, i] for i in range(lin.shape[1]))
    rays: list[np.ndarray] = []
    base = np.vstack([E, lin.T]) if lin.size else E
    need = m - 1
    rows = range(A.shape[0])
    for size in range(0, min(need, A.shape[0]) + 1):
        for S in itertools.combinations(rows, size):
            M = np.vstack([base, A[list(S)]]) if S else base
            ns = _null_space(M, m)
            if ns.shape[1] != 1:
                continue
            d = ns[:, 0]
            for cand in (d, -d):
                if A.shape[0] == 0 or np.all(A @ cand <= 1e-10):
                    if not any(np.allclose(cand, r, atol=1e-9) for r in rays):
                        rays.append(cand)
    return Cone(v, tuple(rays), lineality, A, E)


def full_cone(vertex) -> Cone:
    v = _vec(vertex)
    m = v.shape[0]
    return Cone(v, (), tuple(np.eye(m)), np.zeros((0, m)), np.zeros((0, m)))


def point_cone(vertex) -> Cone:
    v = _vec(vertex)
    m = v.shape[0]
    return Cone(v, (), (), np.zeros((0, m)), np.eye(m))


# =============================================================================
# constraint sets
# =============================================================================


class ConstraintSet:
    """Closed subset of ``R^m``.  Subclasses implement the closed forms."""

    kind: str = "?"
    convex: bool = False
    bounded: bool = False
    closed_form: bool = True

    def __init__(self, dim: int):
        self.dim = int(dim)

    # -- subclass API --------------------------------------------------------

    def contains(self, v) -> bool:
        raise NotImplementedError

    def nearest(self, x) -> np.ndarray:
        """A closest point of the set (any one when not unique)."""
        raise NotImplementedError

    def _dense(self, v, v2) -> bool:
        raise UnsupportedKind(self.kind)

    def _stable(self, v, v2) -> bool:
        raise UnsupportedKind(self.kind)

    def _stable_cone(self, v) -> Cone:
        raise UnsupportedKind(f"no closed-form stable cone for {self.kind}")

    @property
    def params(self) -> dict:
        return {}

    # -- shared behaviour ----------------------------------------------------

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": _jsonable(self.params)}

    def __repr__(self):
        return f"{type(self).__name__}({self.params})"

    def check_member(self, v) -> np.ndarray:
        v = _vec(v, self.dim)
        if not self.contains(v):
            raise NotInOmega(f"{v} is not in {self!r}")
        return v

    def sample(self, rng: np.random.Generator, n: int, radius: float = 10.0) -> np.ndarray:
        """Points of the set spread over a bounded region (for multistart search)."""
        lo, hi = self.bounding_box(radius)
        raw = rng.uniform(lo, hi, size=(n, self.dim))
        return np.array([self.nearest(x) for x in raw])

    def bounding_box(self, radius: float = 10.0):
        return -radius * np.ones(self.dim), radius * np.ones(self.dim)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


class _ConvexMixin:
    """Convex sets: dense = stable = feasible directions; targets support projection."""

    convex = True

    def nearest(self, x):
        return self.project(x)

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def in_orthogonal_cone(self, x, x2, tol: float = CONE_TOL) -> bool:
        x = _vec(x, self.dim)
        if not self.contains(x):
            raise NotInTarget(f"{x} is not in {self!r}")
        return self._support_gap(x, _vec(x2, self.dim)) <= tol

    def _support_gap(self, x, x2) -> float:
        """``sup_{y in S} ⟨x2, y - x⟩`` (may be ``inf``)."""
        raise NotImplementedError


class FullSpace(_ConvexMixin, ConstraintSet):
    kind = "FullSpace"

    def contains(self, v):
        return bool(np.all(np.isfinite(_vec(v, self.dim))))

    def project(self, x):
        return _vec(x, self.dim).copy()

    def _dense(self, v, v2):
        return True

    _stable = _dense

    def _stable_cone(self, v):
        return full_cone(v)

    def _support_gap(self, x, x2):
        return 0.0 if np.linalg.norm(x2) <= CONE_TOL else math.inf

    @property
    def params(self):
        return {"dim": self.dim}


class Singleton(_ConvexMixin, ConstraintSet):
    kind = "Singleton"
    bounded = True

    def __init__(self, point):
        self.point = _vec(point)
        super().__init__(self.point.shape[0])

    def contains(self, v):
        return bool(np.linalg.norm(_vec(v, self.dim) - self.point) <= MEMBER_TOL * max(1.0, np.linalg.norm(self.point)))

    def project(self, x):
        _vec(x, self.dim)
        return self.point.copy()

    def _dense(self, v, v2):
        return self.contains(v2)

    _stable = _dense

    def _stable_cone(self, v):
        return point_cone(v)

    def _support_gap(self, x, x2):
        return 0.0

    def sample(self, rng, n, radius=10.0):
        return np.tile(self.point, (n, 1))

    @property
    def params(self):
        return {"point": self.point}


Point = Singleton


class _Polyhedral(_ConvexMixin, ConstraintSet):
    """Shared machinery for ``{x : A x ≤ b}`` representations."""

    def _rows(self):
        raise NotImplementedError

    def contains(self, v):
        v = _vec(v, self.dim)
        A, b = self._rows()
        if A.shape[0] == 0:
            return True
        return bool(np.all(A @ v <= b + MEMBER_TOL * np.maximum(1.0, np.abs(b))))

    def active(self, v) -> np.ndarray:
        A, b = self._rows()
        if A.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        return np.abs(A @ v - b) <= 1e-10 * np.maximum(1.0, np.abs(b))

    def _dense(self, v, v2):
        A, _ = self._rows()
        act = self.active(v)
        d = v2 - v
        return bool(np.all(A[act] @ d <= MEMBER_TOL * max(1.0, np.linalg.norm(d))))

    _stable = _dense

    def _stable_cone(self, v):
        A, _ = self._rows()
        return polyhedral_cone(v, A[self.active(v)])

    def _support_gap(self, x, x2):
        A, _ = self._rows()
        act = self.active(x)
        if np.linalg.norm(x2) <= CONE_TOL:
            return 0.0
        if not np.any(act):
            return math.inf
        _, res = nnls(A[act].T, x2)
        return 0.0 if res <= CONE_TOL * max(1.0, np.linalg.norm(x2)) else math.inf


class Box(_Polyhedral):
    """Product of closed intervals; infinite bounds allowed."""

    kind = "Box"

    def __init__(self, lower, upper):
        self.lower = _vec(lower)
        self.upper = _vec(upper)
        if self.lower.shape != self.upper.shape or np.any(self.upper < self.lower):
            raise ValueError("Box needs lower <= upper of equal dimension")
        super().__init__(self.lower.shape[0])
        self.bounded = bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def _rows(self):
        m = self.dim
        A, b = [], []
        for i in range(m):
            if np.isfinite(self.upper[i]):
                A.append(np.eye(m)[i])
                b.append(self.upper[i])
            if np.isfinite(self.lower[i]):
                A.append(-np.eye(m)[i])
                b.append(-self.lower[i])
        return np.array(A).reshape(-1, m), np.array(b)

    def contains(self, v):
        v = _vec(v, self.dim)
        tol = MEMBER_TOL * np.maximum(1.0, np.abs(v))
        return bool(np.all(v >= self.lower - tol) and np.all(v <= self.upper + tol))

    def project(self, x):
        return np.clip(_vec(x, self.dim), self.lower, self.upper)

    def _support_gap(self, x, x2):
        gap = 0.0
        for i in range(self.dim):
            if x2[i] > 0:
                gap += x2[i] * (self.upper[i] - x[i])
            elif x2[i] < 0:
                gap += x2[i] * (self.lower[i] - x[i])
        return gap

    def bounding_box(self, radius=10.0):
        lo = np.where(np.isfinite(self.lower), self.lower, -radius)
        hi = np.where(np.isfinite(self.upper), self.upper, radius)
        return lo, np.maximum(hi, lo)

    def vertices(self) -> np.ndarray:
        lo, hi = self.bounding_box()
        return np.array(list(itertools.product(*zip(lo, hi))))

    @property
    def params(self):
        return {"lower": self.lower, "upper": self.upper}


class Halfspaces(_Polyhedral):
    """Convex polyhedron ``{x : A x ≤ b}``."""

    kind = "Halfspaces"

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, float))
        self.b = _vec(b)
        if self.A.shape[0] != self.b.shape[0]:
            raise DimensionMismatch("A and b row counts differ")
        super().__init__(self.A.shape[1])

    def _rows(self):
        return self.A, self.b

    def project(self, x):
        x = _vec(x, self.dim)
        if self.contains(x):
            return x.copy()
        # exact active-set enumeration of the KKT system
        k = self.A.shape[0]
        best = None
        for size in range(1, min(k, self.dim) + 1):
            for S in itertools.combinations(range(k), size):
                AS = self.A[list(S)]
                G = AS @ AS.T
                if np.linalg.matrix_rank(G) < size:
                    continue
                lam = np.linalg.solve(G, AS @ x - self.b[list(S)])
                if np.any(lam < -1e-12):
                    continue
                y = x - AS.T @ lam
                if self.contains(y):
                    dist = np.linalg.norm(y - x)
                    if best is None or dist < best[0] - 1e-14:
                        best = (dist, y)
        if best is None:
            raise ValueError("polyhedron appears to be empty")
        return best[1]

    @property
    def params(self):
        return {"A": self.A, "b": self.b}


class Ball(_ConvexMixin, ConstraintSet):
    kind = "Ball"
    bounded = True

    def __init__(self, center, radius):
        self.center = _vec(center)
        self.radius = float(radius)
        super().__init__(self.center.shape[0])

    def _offset(self, v):
        return np.linalg.norm(_vec(v, self.dim) - self.center) - self.radius

    def contains(self, v):
        return bool(self._offset(v) <= MEMBER_TOL * max(1.0, self.radius))

    def on_boundary(self, v):
        return abs(self._offset(v)) <= 1e-10 * max(1.0, self.radius)

    def project(self, x):
        x = _vec(x, self.dim)
        d = x - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return x.copy()
        return self.center + self.radius * d / r

    def _dense(self, v, v2):
        if not self.on_boundary(v):
            return True
        d = v2 - v
        nd = np.linalg.norm(d)
        return bool(nd <= MEMBER_TOL or d @ (v - self.center) < -MEMBER_TOL * nd * self.radius)

    _stable = _dense

    def _stable_cone(self, v):
        if not self.on_boundary(v):
            return full_cone(v)
        n = (v - self.center) / self.radius
        return polyhedral_cone(v, n[None, :])

    def _support_gap(self, x, x2):
        return float(x2 @ (self.center - x) + self.radius * np.linalg.norm(x2))

    def bounding_box(self, radius=10.0):
        return self.center - self.radius, self.center + self.radius

    def sample(self, rng, n, radius=10.0):
        g = rng.normal(size=(n, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.dim)
        pts = self.center + r * g
        pts[: max(1, n // 4)] = self.center + self.radius * g[: max(1, n // 4)]
        return pts

    @property
    def params(self):
        return {"center": self.center, "radius": self.radius}


class AffineSubspace(_ConvexMixin, ConstraintSet):
    """``{x : A x = b}`` (targets only)."""

    kind = "AffineSubspace"

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, float))
        self.b = _vec(b)
        super().__init__(self.A.shape[1])
        self._pinv = np.linalg.pinv(self.A)

    def contains(self, v):
        v = _vec(v, self.dim)
        return bool(np.all(np.abs(self.A @ v - self.b) <= 1e-10 * np.maximum(1.0, np.abs(self.b))))

    def project(self, x):
        x = _vec(x, self.dim)
        return x - self._pinv @ (self.A @ x - self.b)

    def _dense(self, v, v2):
        return bool(np.all(np.abs(self.A @ (v2 - v)) <= 1e-10 * max(1.0, np.linalg.norm(v2 - v))))

    _stable = _dense

    def _stable_cone(self, v):
        return polyhedral_cone(v, None, self.A)

    def _support_gap(self, x, x2):
        resid = x2 - self.A.T @ (self._pinv.T @ x2)
        return 0.0 if np.linalg.norm(resid) <= CONE_TOL * max(1.0, np.linalg.norm(x2)) else math.inf

    @property
    def params(self):
        return {"A": self.A, "b": self.b}


class FiniteSet(ConstraintSet):
    """Finitely many points; every point is isolated."""

    kind = "FiniteSet"
    bounded = True

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, float))
        super().__init__(self.points.shape[1])

    def contains(self, v):
        v = _vec(v, self.dim)
        return bool(np.min(np.linalg.norm(self.points - v, axis=1)) <= MEMBER_TOL * max(1.0, np.linalg.norm(v)))

    def nearest(self, x):
        x = _vec(x, self.dim)
        return self.points[int(np.argmin(np.linalg.norm(self.points - x, axis=1)))].copy()

    def _dense(self, v, v2):
        return bool(np.linalg.norm(v2 - v) <= MEMBER_TOL * max(1.0, np.linalg.norm(v)))

    _stable = _dense

    def _stable_cone(self, v):
        return point_cone(v)

    def sample(self, rng, n, radius=10.0):
        return self.points.copy()

    def bounding_box(self, radius=10.0):
        return self.points.min(axis=0), self.points.max(axis=0)

    @property
    def params(self):
        return {"points": self.points}


class AbsCone(ConstraintSet):
    """``{(v1, v2) : v2 ≤ |v1|}``."""

    kind = "AbsCone"

    def __init__(self):
        super().__init__(2)

    def contains(self, v):
        v = _vec(v, 2)
        return bool(v[1] <= abs(v[0]) + MEMBER_TOL * max(1.0, abs(v[0])))

    def _boundary(self, v):
        return abs(v[1] - abs(v[0])) <= 1e-10 * max(1.0, abs(v[0]))

    def _dense(self, v, v2):
        if not self._boundary(v):
            return True
        if abs(v[0]) <= 1e-12:
            return self.contains(v2)
        if v[0] < 0:
            return bool(v2[1] <= -v2[0] + MEMBER_TOL)
        return bool(v2[1] <= v2[0] + MEMBER_TOL)

    def _stable(self, v, v2):
        if self._boundary(v) and abs(v[0]) <= 1e-12:
            return bool(v2[1] <= -abs(v2[0]) + MEMBER_TOL)
        return self._dense(v, v2)

    def _stable_cone(self, v):
        if not self._boundary(v):
            return full_cone(v)
        if abs(v[0]) <= 1e-12:
            return polyhedral_cone(v, [[1.0, 1.0], [-1.0, 1.0]])
        if v[0] < 0:
            return polyhedral_cone(v, [[1.0, 1.0]])
        return polyhedral_cone(v, [[-1.0, 1.0]])

    def nearest(self, x):
        x = _vec(x, 2)
        if self.contains(x):
            return x.copy()
        cands = []
        for s in (1.0, -1.0):
            # half-plane v2 <= s v1, i.e. (-s, 1)·v <= 0
            n = np.array([-s, 1.0])
            y = x - max(0.0, n @ x) / 2.0 * n
            cands.append(y)
        return min(cands, key=lambda y: np.linalg.norm(y - x))


class ParabolaHypograph(ConstraintSet):
    """``{(v1, v2) : v2 ≤ v1²}``."""

    kind = "ParabolaHypograph"

    def __init__(self):
        super().__init__(2)

    def contains(self, v):
        v = _vec(v, 2)
        return bool(v[1] <= v[0] ** 2 + MEMBER_TOL * max(1.0, v[0] ** 2))

    def _boundary(self, v):
        return abs(v[1] - v[0] ** 2) <= 1e-10 * max(1.0, v[0] ** 2)

    @staticmethod
    def tangent(v0, x1):
        return v0 * (2.0 * x1 - v0)

    def _dense(self, v, v2):
        if not self._boundary(v):
            return True
        return bool(v2[1] <= self.tangent(v[0], v2[0]) + MEMBER_TOL * max(1.0, abs(v2[1])))

    def _stable(self, v, v2):
        if not self._boundary(v):
            return True
        return bool(v2[1] < self.tangent(v[0], v2[0]) - MEMBER_TOL * max(1.0, abs(v2[1])))

    def _stable_cone(self, v):
        if not self._boundary(v):
            return full_cone(v)
        return polyhedral_cone(v, [[-2.0 * v[0], 1.0]])

    def nearest(self, x):
        x = _vec(x, 2)
        if self.contains(x):
            return x.copy()
        # stationary points of |(s, s²) - x|²: 2s³ + (1 - 2 x2) s - x1 = 0
        roots = np.roots([2.0, 0.0, 1.0 - 2.0 * x[1], -x[0]])
        pts = [np.array([s.real, s.real ** 2]) for s in roots if abs(s.imag) < 1e-9]
        return min(pts, key=lambda y: np.linalg.norm(y - x))


class QuarterDisc(ConstraintSet):
    """``{v1 ≥ 0, v2 ≥ 0, v1² + v2² ≤ 1}``."""

    kind = "QuarterDisc"
    convex = True
    bounded = True

    def __init__(self):
        super().__init__(2)

    def contains(self, v):
        v = _vec(v, 2)
        t = MEMBER_TOL
        return bool(v[0] >= -t and v[1] >= -t and v @ v <= 1.0 + t)

    def _faces(self, v):
        return abs(v[0]) <= 1e-12, abs(v[1]) <= 1e-12, abs(v @ v - 1.0) <= 1e-10

    def _dense(self, v, v2):
        f1, f2, arc = self._faces(v)
        t = MEMBER_TOL
        if f1 and v2[0] < v[0] - t:
            return False
        if f2 and v2[1] < v[1] - t:
            return False
        if arc and not (v2 @ v < 1.0 - t or np.linalg.norm(v2 - v) <= t):
            return False
        return True

    _stable = _dense

    def _stable_cone(self, v):
        f1, f2, arc = self._faces(v)
        rows = []
        if f1:
            rows.append([-1.0, 0.0])
        if f2:
            rows.append([0.0, -1.0])
        if arc:
            rows.append(list(v))
        if not rows:
            return full_cone(v)
        return polyhedral_cone(v, rows)

    def nearest(self, x):
        x = _vec(x, 2)
        if self.contains(x):
            return x.copy()
        y = np.maximum(x, 0.0)
        r = np.linalg.norm(y)
        return y / r if r > 1.0 else y

    project = nearest

    def bounding_box(self, radius=10.0):
        return np.zeros(2), np.ones(2)


class LineFan(ConstraintSet):
    """Segments from ``(0, 2^-k)`` to ``(1, 0)`` for ``k = 0, 1, ...`` plus ``[0, 1] × {0}``.

    ``depth`` only bounds the segments used for nearest-point search and
    sampling; membership and the cone closed forms cover every ``k``.
    """

    kind = "LineFan"
    bounded = True
    APEX = np.array([1.0, 0.0])

    def __init__(self, depth: int = 40):
        super().__init__(2)
        self.depth = int(depth)

    def _k(self, v) -> int | None:
        """Index of the segment carrying ``v`` (``v2 > 0``), or None."""
        if v[1] <= 0 or v[0] < -1e-12 or v[0] > 1 + 1e-12:
            return None
        ratio = (1.0 - v[0]) / v[1]
        if ratio < 1.0 - 1e-9:
            return None
        k = round(math.log2(ratio))
        if abs(ratio - 2.0 ** k) <= 1e-9 * ratio:
            return int(k)
        return None

    def contains(self, v):
        v = _vec(v, 2)
        if -1e-12 <= v[0] <= 1 + 1e-12 and abs(v[1]) <= 1e-12:
            return True
        return self._k(v) is not None

    def _where(self, v):
        if np.linalg.norm(v - self.APEX) <= 1e-12:
            return "apex", None
        if abs(v[1]) <= 1e-12:
            return ("origin" if abs(v[0]) <= 1e-12 else "base"), None
        k = self._k(v)
        return ("left_end" if abs(v[0]) <= 1e-12 else "segment"), k

    @staticmethod
    def _on_line(k, x):
        return abs(x[1] - (1.0 - x[0]) / 2.0 ** k) <= 1e-12 * max(1.0, abs(x[1]))

    def _dense(self, v, v2):
        where, k = self._where(v)
        t = 1e-12
        if where == "segment":
            return self._on_line(k, v2)
        if where == "left_end":
            return self._on_line(k, v2) and v2[0] >= -t
        if where == "base":
            return bool(v2[1] >= -t)
        if where == "origin":
            return bool(v2[0] >= -t and v2[1] >= -t)
        # apex: any ray from the apex along one of the segments
        if np.linalg.norm(v2 - self.APEX) <= t:
            return True
        if v2[0] > 1.0 + t:
            return False
        if abs(v2[1]) <= t:
            return True
        return self._k(np.array([max(v2[0], -1e300), v2[1]])) is not None or self._k_free(v2)

    def _k_free(self, x):
        # line membership for points left of x = 0 (segments extended as lines)
        if x[1] <= 0:
            return False
        ratio = (1.0 - x[0]) / x[1]
        if ratio < 1.0 - 1e-9:
            return False
        k = round(math.log2(ratio))
        return abs(ratio - 2.0 ** k) <= 1e-9 * ratio

    def _stable(self, v, v2):
        where, k = self._where(v)
        if where in ("segment", "left_end"):
            return self._dense(v, v2)
        return bool(np.linalg.norm(v2 - self.APEX) <= 1e-12)

    def _stable_cone(self, v):
        where, k = self._where(v)
        slope = 2.0 ** -(k or 0)
        if where == "segment":
            return polyhedral_cone(v, None, [[slope, 1.0]])
        if where == "left_end":
            return polyhedral_cone(v, [[-1.0, 0.0]], [[slope, 1.0]])
        if where in ("base", "origin"):
            return polyhedral_cone(v, [[-1.0, 0.0]], [[0.0, 1.0]])
        return point_cone(v)

    def _segments(self):
        yield np.array([0.0, 0.0]), self.APEX
        for k in range(self.depth + 1):
            yield np.array([0.0, 2.0 ** -k]), self.APEX

    def nearest(self, x):
        x = _vec(x, 2)
        best = None
        for p, q in self._segments():
            d = q - p
            s = np.clip((x - p) @ d / (d @ d), 0.0, 1.0)
            y = p + s * d
            if best is None or np.linalg.norm(y - x) < np.linalg.norm(best - x):
                best = y
        return best

    def sample(self, rng, n, radius=10.0):
        segs = list(self._segments())
        idx = rng.integers(0, min(len(segs), 8), size=n)
        s = rng.uniform(size=n)
        return np.array([segs[i][0] + s[j] * (segs[i][1] - segs[i][0]) for j, i in enumerate(idx)])

    def bounding_box(self, radius=10.0):
        return np.zeros(2), np.ones(2)

    @property
    def params(self):
        return {"depth": self.depth}


# =============================================================================
# factory
# =============================================================================

_KINDS = {
    "FullSpace": lambda p: FullSpace(p["dim"]),
    "Singleton": lambda p: Singleton(p["point"]),
    "Point": lambda p: Singleton(p["point"]),
    "Box": lambda p: Box(p["lower"], p["upper"]),
    "Ball": lambda p: Ball(p["center"], p["radius"]),
    "Halfspaces": lambda p: Halfspaces(p["A"], p["b"]),
    "AffineSubspace": lambda p: AffineSubspace(p["A"], p["b"]),
    "FiniteSet": lambda p: FiniteSet(p["points"]),
    "AbsCone": lambda p: AbsCone(),
    "ParabolaHypograph": lambda p: ParabolaHypograph(),
    "QuarterDisc": lambda p: QuarterDisc(),
    "LineFan": lambda p: LineFan(p.get("depth", 40)),
}

TARGET_KINDS = ("Point", "Singleton", "AffineSubspace", "Box", "Ball", "Halfspaces")


def constraint_set_from_json(data: dict) -> ConstraintSet:
    kind = data.get("kind")
    if kind not in _KINDS:
        raise UnsupportedKind(f"unknown constraint kind {kind!r}")
    params = dict(data.get("params", {}))
    for key in ("lower", "upper"):
        if key in params:
            params[key] = [float(x) for x in params[key]]
    return _KINDS[kind](params)


def target_from_json(data: dict) -> ConstraintSet:
    if data.get("kind") not in TARGET_KINDS:
        raise UnsupportedKind(f"{data.get('kind')!r} is not a convex target kind")
    return constraint_set_from_json(data)


# =============================================================================
# operations
# =============================================================================


def member(omega: ConstraintSet, v) -> bool:
    return omega.contains(_vec(v, omega.dim))


def alpha_set_probe(omega: ConstraintSet, v, v2, alphas) -> list[bool]:
    """Membership of ``v + α (v2 - v)`` for each ``α``."""
    v = omega.check_member(v)
    v2 = _vec(v2, omega.dim)
    return [True if a == 0 else omega.contains(v + a * (v2 - v)) for a in alphas]


def _numeric_dense(omega, v, v2) -> bool:
    probes = [(k, omega.contains(v + 2.0 ** -k * (v2 - v))) for k in DENSE_K]
    tail = [ok for k, ok in probes if k >= DENSE_K_TAIL]
    return sum(tail) >= DENSE_FRACTION * len(tail)


def _numeric_stable(omega, v, v2, rng) -> bool:
    levels = []
    for k in STABLE_K:
        eps = 2.0 ** -k
        g = rng.normal(size=(STABLE_SAMPLES, omega.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = eps * rng.uniform(0.5, 2.0, size=(STABLE_SAMPLES, 1))
        cands = [v] + [omega.nearest(v + ri * gi) for ri, gi in zip(r, g)]
        near = [c for c in cands if np.linalg.norm(c - v) <= eps]
        levels.append(all(_numeric_dense(omega, c, v2) for c in near))
    return all(levels[-8:])


def is_dense_direction(omega: ConstraintSet, v, v2, method: str = "auto") -> bool:
    """Whether ``0`` is an accumulation point of ``{α : v + α(v2 - v) ∈ Ω}``.

    ``method="numeric"`` forces the dyadic probe heuristic.
    """
    v = omega.check_member(v)
    v2 = _vec(v2, omega.dim)
    if method == "numeric" or not omega.closed_form:
        return _numeric_dense(omega, v, v2)
    return omega._dense(v, v2)


def is_stable_dense_direction(omega: ConstraintSet, v, v2, method: str = "auto", seed: int = 0) -> bool:
    v = omega.check_member(v)
    v2 = _vec(v2, omega.dim)
    if method == "numeric" or not omega.closed_form:
        return _numeric_stable(omega, v, v2, np.random.default_rng(seed))
    return omega._stable(v, v2)


def stable_cone(omega: ConstraintSet, v) -> Cone:
    """Closed convex cone of vertex ``v`` spanned by the stable dense directions."""
    v = omega.check_member(v)
    return omega._stable_cone(v)


def project(target: ConstraintSet, x) -> np.ndarray:
    if not target.convex:
        raise UnsupportedKind(f"projection onto non-convex {target.kind}")
    return target.project(_vec(x, target.dim))


def in_orthogonal_cone(target: ConstraintSet, x, x2, tol: float = CONE_TOL) -> bool:
    """Whether ``⟨x2, y - x⟩ ≤ tol`` for every ``y`` in the target."""
    return target.in_orthogonal_cone(x, x2, tol)
