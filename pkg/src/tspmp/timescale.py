"""Bounded time scales as finite unions of closed intervals.

A time scale is stored canonically: sorted, pairwise disjoint, non-touching
closed segments ``[l_i, r_i]``; a degenerate segment ``[x, x]`` is an
isolated point.  The right-scattered points are exactly the right ends of
all segments but the last, so every structural operator reduces to a
binary search over the segment bounds.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyScale,
    NonPositiveStep,
    NotInScale,
    ReversedInterval,
    SingletonScale,
)

SNAP_TOL = 1e-12


class RightClass(enum.Enum):
    RIGHT_DENSE = "RD"
    RIGHT_SCATTERED = "RS"


class LeftClass(enum.Enum):
    LEFT_DENSE = "LD"
    LEFT_SCATTERED = "LS"


@dataclass(frozen=True)
class PointClass:
    right: RightClass
    left: LeftClass

    @property
    def label(self) -> str:
        return f"{self.right.value}/{self.left.value}"


@dataclass(frozen=True)
class TimeScale:
    """Canonical finite union of disjoint closed intervals.

    Build instances with :func:`build_timescale` (or one of the helper
    constructors below); the constructor itself assumes canonical input.
    """

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "_lefts", tuple(l for l, _ in self.segments))

    # -- basic shape ---------------------------------------------------------

    @property
    def a(self) -> float:
        return self.segments[0][0]

    @property
    def max(self) -> float:
        return self.segments[-1][1]

    @property
    def is_discrete(self) -> bool:
        return all(l == r for l, r in self.segments)

    @property
    def is_continuum(self) -> bool:
        return len(self.segments) == 1

    def to_json(self) -> dict:
        return {"segments": [[l, r] for l, r in self.segments]}

    @classmethod
    def from_json(cls, data: dict) -> "TimeScale":
        return build_timescale(data["segments"])

    # -- membership ----------------------------------------------------------

    def _locate(self, t: float) -> int | None:
        i = bisect.bisect_right(self._lefts, t + SNAP_TOL) - 1
        if i < 0:
            return None
        l, r = self.segments[i]
        if l - SNAP_TOL <= t <= r + SNAP_TOL:
            return i
        return None

    def __contains__(self, t) -> bool:
        return self._locate(float(t)) is not None

    def snap(self, t: float) -> float:
        """Return ``t`` moved onto a segment bound if it lies within tolerance."""
        i = self._require(t)
        l, r = self.segments[i]
        if abs(t - l) <= SNAP_TOL:
            return l
        if abs(t - r) <= SNAP_TOL:
            return r
        return float(t)

    def _require(self, t: float) -> int:
        i = self._locate(float(t))
        if i is None:
            raise NotInScale(f"{t!r} is not a point of the time scale")
        return i

    def segment_index(self, t: float) -> int:
        return self._require(t)

    # -- jump operators ------------------------------------------------------

    def sigma(self, t: float) -> float:
        i = self._require(t)
        l, r = self.segments[i]
        if t < r - SNAP_TOL:
            return float(t)
        if i == len(self.segments) - 1:
            return r
        return self.segments[i + 1][0]

    def rho(self, t: float) -> float:
        i = self._require(t)
        l, r = self.segments[i]
        if t > l + SNAP_TOL:
            return float(t)
        if i == 0:
            return l
        return self.segments[i - 1][1]

    def mu(self, t: float) -> float:
        i = self._require(t)
        l, r = self.segments[i]
        if t < r - SNAP_TOL or i == len(self.segments) - 1:
            return 0.0
        return self.segments[i + 1][0] - r

    graininess = mu

    def is_rs(self, t: float) -> bool:
        return self.mu(t) > 0.0

    def classify(self, t: float) -> PointClass:
        right = RightClass.RIGHT_SCATTERED if self.is_rs(t) else RightClass.RIGHT_DENSE
        left = LeftClass.LEFT_SCATTERED if self.rho(t) < self.snap(t) else LeftClass.LEFT_DENSE
        return PointClass(right, left)

    def rs_points(self, c: float | None = None, d: float | None = None) -> list[float]:
        """Right-scattered points in ``[c, d[``."""
        c = self.a if c is None else c
        d = self.max if d is None else d
        return [r for (_, r) in self.segments[:-1] if c - SNAP_TOL <= r < d - SNAP_TOL]

    def is_interior(self, t: float) -> bool:
        """Interior of the time scale for the topology of the real line."""
        i = self._require(t)
        l, r = self.segments[i]
        return l + SNAP_TOL < t < r - SNAP_TOL

    # -- measure -------------------------------------------------------------

    def delta_measure(self, c: float, d: float) -> float:
        self._require(c)
        self._require(d)
        if d < c:
            raise ReversedInterval(f"[{c}, {d}[ is reversed")
        return float(d - c)

    def delta_measure_set(self, pieces: Iterable[Sequence[float]]) -> float:
        """Δ-measure of a finite union of pieces.

        Each piece ``(x, y)`` with ``x < y`` denotes the half-open real interval
        ``[x, y[`` and ``(x, x)`` the singleton ``{x}``; pieces are intersected
        with the time scale minus its maximum and must be pairwise disjoint.
        """
        lebesgue = 0.0
        jumps = 0.0
        rs = [(r, self.segments[k + 1][0] - r) for k, (_, r) in enumerate(self.segments[:-1])]
        for x, y in pieces:
            if y < x:
                raise ReversedInterval(f"piece ({x}, {y}) is reversed")
            if x == y:
                for r, m in rs:
                    if abs(r - x) <= SNAP_TOL:
                        jumps += m
                continue
            for l, r in self.segments:
                lebesgue += max(0.0, min(r, y) - max(l, x))
            for r, m in rs:
                if x - SNAP_TOL <= r < y - SNAP_TOL:
                    jumps += m
        return lebesgue + jumps

    # -- restriction ---------------------------------------------------------

    def window(self, c: float, d: float) -> "TimeScale":
        """The time scale ``[c, d]_T`` as a time scale of its own."""
        c, d = self.snap(c), self.snap(d)
        if d <= c:
            raise ReversedInterval(f"window [{c}, {d}] is empty or reversed")
        segs = []
        for l, r in self.segments:
            lo, hi = max(l, c), min(r, d)
            if lo <= hi:
                segs.append((lo, hi))
        return TimeScale(tuple(segs))


def build_timescale(raw_segments) -> TimeScale:
    """Canonicalize a list of closed intervals into a :class:`TimeScale`."""
    segs = []
    for seg in raw_segments:
        l, r = (float(v) for v in seg)
        if not (math.isfinite(l) and math.isfinite(r)):
            raise ValueError("segments must be finite")
        if r < l:
            raise ReversedInterval(f"segment [{l}, {r}] is reversed")
        if r - l <= SNAP_TOL:
            r = l
        segs.append((l, r))
    if not segs:
        raise EmptyScale("a time scale needs at least one segment")
    segs.sort()
    merged = [list(segs[0])]
    for l, r in segs[1:]:
        if l <= merged[-1][1] + SNAP_TOL:
            merged[-1][1] = max(merged[-1][1], r)
        else:
            merged.append([l, r])
    if len(merged) == 1 and merged[0][0] == merged[0][1]:
        raise SingletonScale("a time scale needs at least two points")
    return TimeScale(tuple((l, r) for l, r in merged))


def sample_grid(ts: TimeScale, c: float, d: float, h: float) -> np.ndarray:
    """Strictly increasing grid on ``[c, d]_T``.

    The grid contains ``c``, ``d``, every right-scattered point and both
    ends of every continuous piece; dense pieces are cut into equal cells of
    length at most ``h``.
    """
    if not h > 0:
        raise NonPositiveStep(f"step must be positive, got {h}")
    c, d = ts.snap(c), ts.snap(d)
    if d < c:
        raise ReversedInterval(f"[{c}, {d}] is reversed")
    pts: list[float] = []
    for l, r in ts.segments:
        lo, hi = max(l, c), min(r, d)
        if lo > hi:
            continue
        if lo == hi:
            pts.append(lo)
            continue
        n = max(1, math.ceil((hi - lo) / h - 1e-9))
        pts.extend(lo + (hi - lo) * k / n for k in range(n))
        pts.append(hi)
    return np.array(sorted(set(pts)), dtype=float)


# -- convenience constructors ------------------------------------------------


def integer_timescale(lo: int, hi: int, step: float = 1.0) -> TimeScale:
    """The lattice ``{lo, lo+step, ..., hi}`` (``hℤ`` restricted to a window)."""
    n = int(round((hi - lo) / step))
    return build_timescale([[lo + k * step] * 2 for k in range(n + 1)])


def interval(lo: float, hi: float) -> TimeScale:
    return build_timescale([[lo, hi]])


def cantor_timescale(depth: int, lo: float = 0.0, hi: float = 1.0) -> TimeScale:
    """Depth-``depth`` approximation of the middle-thirds Cantor set."""
    segs = [(lo, hi)]
    for _ in range(depth):
        nxt = []
        for l, r in segs:
            third = (r - l) / 3.0
            nxt.append((l, l + third))
            nxt.append((r - third, r))
        segs = nxt
    return build_timescale(segs)


# -- function forms of the structural operators ------------------------------


def sigma(ts: TimeScale, t: float) -> float:
    return ts.sigma(t)


def rho(ts: TimeScale, t: float) -> float:
    return ts.rho(t)


def graininess(ts: TimeScale, t: float) -> float:
    return ts.mu(t)


def classify(ts: TimeScale, t: float) -> PointClass:
    return ts.classify(t)


def delta_measure(ts: TimeScale, c: float, d: float) -> float:
    return ts.delta_measure(c, d)
