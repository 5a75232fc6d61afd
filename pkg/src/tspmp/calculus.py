"""Δ-calculus on sampled grids: integrals, derivatives, generalized exponential."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import (
    AtScaleMax,
    GridMismatch,
    NegativeRate,
    NotOnGrid,
    ReversedInterval,
)
from .timescale import SNAP_TOL, TimeScale, sample_grid


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Vector-valued samples aligned with a time grid.

    ``values`` always has shape ``(len(grid), dim)``; one-dimensional input
    is promoted to a column.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.shape[0] != grid.shape[0]:
            raise GridMismatch(
                f"{values.shape[0]} values for a grid of {grid.shape[0]} points"
            )
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise GridMismatch("grid must be strictly increasing")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.grid.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def index(self, t: float) -> int:
        k = int(np.searchsorted(self.grid, t - SNAP_TOL))
        if k < len(self.grid) and abs(self.grid[k] - t) <= SNAP_TOL:
            return k
        raise NotOnGrid(f"{t!r} is not a grid point")

    def has_point(self, t: float) -> bool:
        try:
            self.index(t)
        except NotOnGrid:
            return False
        return True

    def at(self, t: float) -> np.ndarray:
        return self.values[self.index(t)]

    def left_value(self, t: float) -> np.ndarray:
        """Piecewise-constant (left value) interpolation at an arbitrary time."""
        k = int(np.searchsorted(self.grid, t + SNAP_TOL, side="right")) - 1
        return self.values[max(k, 0)]

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def allclose(self, other: "GridFunction", **kw) -> bool:
        return (
            len(self) == len(other)
            and np.allclose(self.grid, other.grid, **kw)
            and np.allclose(self.values, other.values, **kw)
        )

    def to_json(self) -> dict:
        return {"grid": self.grid.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "GridFunction":
        return cls(np.asarray(data["grid"], float), np.asarray(data["values"], float))

    @classmethod
    def sample(cls, ts: TimeScale, func, c: float, d: float, h: float) -> "GridFunction":
        grid = sample_grid(ts, c, d, h)
        return cls(grid, np.array([np.atleast_1d(func(t)) for t in grid], dtype=float))


# -- grid cells --------------------------------------------------------------


def iter_cells(ts: TimeScale, grid: np.ndarray, c: float, d: float) -> Iterator[tuple[int, float, bool]]:
    """Yield ``(k, width, is_rs)`` for the cells ``[t_k, t_{k+1}[`` inside ``[c, d[``.

    A right-scattered grid point must be followed by its forward jump, so
    that the cell is exactly the gap carried by the point mass ``μ(t_k)``.
    """
    if d < c - SNAP_TOL:
        raise ReversedInterval(f"[{c}, {d}[ is reversed")
    k0 = _grid_index(grid, c)
    k1 = _grid_index(grid, d)
    for k in range(k0, k1):
        t = grid[k]
        width = grid[k + 1] - t
        mu = ts.mu(t)
        if mu > 0.0:
            if abs(ts.sigma(t) - grid[k + 1]) > SNAP_TOL:
                raise GridMismatch(f"grid skips the forward jump of the scattered point {t}")
            yield k, mu, True
        else:
            if ts.segment_index(t) != ts.segment_index(grid[k + 1]):
                raise GridMismatch(f"grid cell [{t}, {grid[k + 1]}] leaves a dense segment")
            yield k, width, False


def _grid_index(grid: np.ndarray, t: float) -> int:
    k = int(np.searchsorted(grid, t - SNAP_TOL))
    if k < len(grid) and abs(grid[k] - t) <= SNAP_TOL:
        return k
    raise GridMismatch(f"{t!r} is not covered by the grid")


def integrate_cells(ts, grid, left, right, c, d) -> np.ndarray:
    """Δ-integral from per-cell end values.

    ``left[k]``/``right[k]`` are the integrand at the two ends of cell ``k``
    (they may differ from neighbouring cells when the integrand jumps at a
    grid point).  Dense cells use the trapezoid rule, scattered points
    contribute ``μ(r) · left[r]`` exactly.
    """
    left = np.asarray(left, float)
    right = np.asarray(right, float)
    total = np.zeros(left.shape[1:] if left.ndim > 1 else ())
    for k, width, rs in iter_cells(ts, grid, c, d):
        if rs:
            total = total + width * left[k]
        else:
            total = total + 0.5 * width * (left[k] + right[k])
    return total


def delta_integral(ts: TimeScale, f: GridFunction, c: float, d: float, rule: str = "trapezoid") -> np.ndarray:
    """``∫_{[c,d[_T} f(τ) Δτ`` for a grid function.

    ``rule="left"`` integrates the piecewise-constant left-value interpolant
    (exact for controls), ``"trapezoid"`` the piecewise-linear one.
    """
    v = f.values
    if rule == "trapezoid":
        right = v[1:]
    elif rule == "left":
        right = v[:-1]
    else:
        raise ValueError(f"unknown rule {rule!r}")
    if len(v) < 2:
        return np.zeros(f.dim)
    return integrate_cells(ts, f.grid, v[:-1], right, c, d)


def delta_derivative(ts: TimeScale, f: GridFunction, t: float) -> np.ndarray:
    """Δ-derivative of sampled data at a grid point.

    Exact divided difference at right-scattered points; at right-dense points
    a second-order centred difference when both neighbours share the dense
    segment of ``t``, a forward difference otherwise.
    """
    k = f.index(t)
    grid, v = f.grid, f.values
    if k == len(grid) - 1 or abs(t - ts.max) <= SNAP_TOL:
        raise AtScaleMax(f"no Δ-derivative at the last point {t}")
    mu = ts.mu(grid[k])
    if mu > 0.0:
        if abs(ts.sigma(grid[k]) - grid[k + 1]) > SNAP_TOL:
            raise GridMismatch(f"grid skips σ({t})")
        return (v[k + 1] - v[k]) / mu
    seg = ts.segment_index(grid[k])
    if ts.segment_index(grid[k + 1]) != seg:
        raise GridMismatch(f"no grid neighbour to the right of {t} in its segment")
    if k > 0 and ts.segment_index(grid[k - 1]) == seg and ts.mu(grid[k - 1]) == 0.0:
        h1 = grid[k] - grid[k - 1]
        h2 = grid[k + 1] - grid[k]
        return (
            -h2 / (h1 * (h1 + h2)) * v[k - 1]
            + (h2 - h1) / (h1 * h2) * v[k]
            + h1 / (h2 * (h1 + h2)) * v[k + 1]
        )
    return (v[k + 1] - v[k]) / (grid[k + 1] - grid[k])


# -- generalized exponential and Gronwall --------------------------------------


def _log_growth(ts: TimeScale, L: float, c: float, t: float) -> float:
    if L < 0:
        raise NegativeRate(f"rate must be nonnegative, got {L}")
    c, t = ts.snap(c), ts.snap(t)
    if t < c:
        raise ReversedInterval(f"[{c}, {t}[ is reversed")
    jumps = [(r, ts.mu(r)) for r in ts.rs_points(c, t)]
    dense = (t - c) - sum(m for _, m in jumps)
    return L * max(dense, 0.0) + sum(math.log1p(L * m) for _, m in jumps)


def generalized_exp(ts: TimeScale, L: float, c: float, t: float) -> float:
    """``e_L(t, c) = exp(L · dense length) · Π_{r ∈ [c,t[ ∩ RS} (1 + L μ(r))``."""
    return math.exp(_log_growth(ts, L, c, t))


def gronwall_envelope(ts: TimeScale, L1: float, L2: float, c: float, d: float, h: float = 1e-3) -> GridFunction:
    """The bound ``t ↦ L1 · e_{L2}(t, c)`` sampled on ``[c, d]_T``."""
    if L1 < 0:
        raise NegativeRate(f"L1 must be nonnegative, got {L1}")
    grid = sample_grid(ts, c, d, h)
    return GridFunction(grid, np.array([L1 * generalized_exp(ts, L2, c, t) for t in grid]))


def leibniz_residual(ts: TimeScale, q: GridFunction, q2: GridFunction, t: float, form: int = 1) -> float:
    """Defect of the product rule for ``⟨q, q2⟩`` at a grid point.

    ``form=1`` checks ``⟨q^Δ, q2^σ⟩ + ⟨q, q2^Δ⟩``; ``form=2`` checks
    ``⟨q^Δ, q2⟩ + ⟨q^σ, q2^Δ⟩``.
    """
    if not np.array_equal(q.grid, q2.grid):
        raise GridMismatch("both factors must share a grid")
    k = q.index(t)
    prod = GridFunction(q.grid, np.einsum("ij,ij->i", q.values, q2.values))
    lhs = delta_derivative(ts, prod, t)[0]
    dq = delta_derivative(ts, q, t)
    dq2 = delta_derivative(ts, q2, t)
    shifted = k + 1 if ts.mu(q.grid[k]) > 0.0 else k
    if form == 1:
        rhs = dq @ q2.values[shifted] + q.values[k] @ dq2
    elif form == 2:
        rhs = dq @ q2.values[k] + q.values[shifted] @ dq2
    else:
        raise ValueError("form must be 1 or 2")
    return float(abs(lhs - rhs))
