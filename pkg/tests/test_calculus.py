import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tspmp.calculus import (
    GridFunction, delta_derivative, delta_integral, generalized_exp, gronwall_envelope, leibniz_residual,
)
from tspmp.errors import AtScaleMax, GridMismatch, NegativeRate
from tspmp.timescale import build_timescale, integer_timescale, interval, sample_grid

from strategies import points_in, timescales


def sampled(ts, func, h=1e-3):
    return GridFunction.sample(ts, func, ts.a, ts.max, h)


def test_integral_of_one_is_length(mixed_scale):
    f = sampled(mixed_scale, lambda t: 1.0, 0.1)
    assert delta_integral(mixed_scale, f, 0, 2)[0] == pytest.approx(2.0)


def test_integral_decomposition():
    ts = build_timescale([[0, 1], [2, 2], [3, 3]])
    f = sampled(ts, lambda t: t, 0.01)
    # ∫_0^1 t dt + μ(1)·1 + μ(2)·2
    assert delta_integral(ts, f, 0, 3)[0] == pytest.approx(3.5, abs=1e-12)
    assert delta_integral(ts, f, 0.5, 0.5)[0] == 0.0


def test_integral_requires_covering_grid(mixed_scale):
    f = GridFunction([0.0, 0.5], [1.0, 1.0])
    with pytest.raises(GridMismatch):
        delta_integral(mixed_scale, f, 0, 2)


def test_derivative_examples():
    ts = integer_timescale(0, 2)
    f = GridFunction([0, 1, 2], [0, 1, 4])
    assert delta_derivative(ts, f, 1)[0] == 3
    with pytest.raises(AtScaleMax):
        delta_derivative(ts, f, 2)
    ts = interval(0, 1)
    f = sampled(ts, lambda t: t * t)
    assert delta_derivative(ts, f, 0.5)[0] == pytest.approx(1.0, abs=1e-6)
    assert delta_derivative(ts, sampled(ts, lambda t: 3.0), 0.5)[0] == 0.0


def test_generalized_exponential_examples():
    assert generalized_exp(interval(0, 1), 0.7, 0, 1) == pytest.approx(math.exp(0.7), rel=1e-14)
    assert generalized_exp(integer_timescale(0, 5), 1.0, 0, 3) == pytest.approx(8.0, rel=1e-14)
    assert generalized_exp(build_timescale([[0, 1], [2, 3]]), 0.0, 0, 3) == 1.0
    with pytest.raises(NegativeRate):
        generalized_exp(interval(0, 1), -1.0, 0, 1)


def test_gronwall_envelope_examples():
    ts = integer_timescale(0, 2)
    assert gronwall_envelope(ts, 1.0, 1.0, 0, 2).values[:, 0].tolist() == [1, 2, 4]
    assert np.all(gronwall_envelope(ts, 0.0, 3.0, 0, 2).values == 0)
    assert np.all(gronwall_envelope(interval(0, 1), 2.5, 0.0, 0, 1, 0.1).values == 2.5)


def test_leibniz_examples():
    ts = integer_timescale(0, 2)
    q = GridFunction([0, 1, 2], [1, 2, 3])
    q2 = GridFunction([0, 1, 2], [1, 1, 2])
    assert leibniz_residual(ts, q, q2, 0) <= 1e-12
    assert leibniz_residual(ts, q, q2, 1, form=2) <= 1e-12
    ts = interval(0, 1)
    q = sampled(ts, lambda t: [math.sin(t), t])
    q2 = sampled(ts, lambda t: [math.cos(t), t * t])
    assert leibniz_residual(ts, q, q2, 0.4) <= 1e-2
    c = sampled(ts, lambda t: [1.0, 2.0])
    assert leibniz_residual(ts, c, c, 0.4) == 0.0


@given(timescales(), st.floats(0, 3), st.data())
def test_semigroup_law(ts, L, data):
    pts = sorted(data.draw(points_in(ts)) for _ in range(3))
    c, t1, t2 = (ts.snap(p) for p in pts)
    lhs = generalized_exp(ts, L, t1, t2) * generalized_exp(ts, L, c, t1)
    assert lhs == pytest.approx(generalized_exp(ts, L, c, t2), rel=1e-10)


@given(timescales(), st.floats(0, 3), st.data())
def test_exponential_monotone(ts, L, data):
    c, t1, t2 = sorted(ts.snap(data.draw(points_in(ts))) for _ in range(3))
    assert generalized_exp(ts, L, c, t1) <= generalized_exp(ts, L, c, t2) * (1 + 1e-12)
    assert generalized_exp(ts, L, t1, t2) <= generalized_exp(ts, L, c, t2) * (1 + 1e-12)


@given(timescales(), st.data())
def test_integral_additivity(ts, data):
    c, d, e = sorted(ts.snap(data.draw(points_in(ts))) for _ in range(3))
    grid = np.unique(np.concatenate([sample_grid(ts, ts.a, ts.max, 0.3), [c, d, e]]))
    f = GridFunction(grid, np.sin(grid) + 2.0)
    whole = delta_integral(ts, f, c, e)[0]
    parts = delta_integral(ts, f, c, d)[0] + delta_integral(ts, f, d, e)[0]
    assert parts == pytest.approx(whole, rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=8), st.lists(st.floats(0.1, 2), min_size=8, max_size=8))
def test_fundamental_theorem_discrete(vals, gaps):
    pts = np.concatenate([[0.0], np.cumsum(gaps[: len(vals) - 1])])
    ts = build_timescale([[p, p] for p in pts])
    f = GridFunction(pts, vals)
    df = GridFunction(pts, [delta_derivative(ts, f, t)[0] for t in pts[:-1]] + [0.0])
    assert delta_integral(ts, df, pts[0], pts[-1], rule="left")[0] == pytest.approx(vals[-1] - vals[0], abs=1e-10)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_leibniz_forms_agree_on_discrete_scale(a, b):
    ts = integer_timescale(0, 3)
    q, q2 = GridFunction(range(4), a), GridFunction(range(4), b)
    for t in (0, 1, 2):
        assert leibniz_residual(ts, q, q2, t, 1) <= 1e-9 * (1 + max(map(abs, a + b))) ** 2
        assert leibniz_residual(ts, q, q2, t, 2) <= 1e-9 * (1 + max(map(abs, a + b))) ** 2
