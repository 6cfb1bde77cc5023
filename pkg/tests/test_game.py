import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neseek import game as gm
from conftest import EXAMPLE1_NE, aggregate_ne

A1 = [1.0, 0.5, 0.8, 0.7, 1.1, 0.6]
B1 = [6, 10, 7, 8, 6, 12]


def ex1_game():
    return gm.price_form(A1, B1, 50, 0.5)


def single(xi=0.5, beta=0.0, p0=1.0, a=0.0):
    return gm.GameModel.from_arrays([xi], [beta], [0.0], p0, a)


@st.composite
def games(draw):
    n = draw(st.integers(1, 7))
    xi = draw(st.lists(st.floats(0.1, 5.0), min_size=n, max_size=n))
    beta = draw(st.lists(st.floats(-20, 20), min_size=n, max_size=n))
    alpha = draw(st.lists(st.floats(-5, 5), min_size=n, max_size=n))
    p0 = draw(st.floats(0, 100))
    a = draw(st.floats(0, 3))
    return gm.GameModel.from_arrays(xi, beta, alpha, p0, a)


def test_gradient_examples():
    assert gm.gradient(single(), 0, [1.0]) == 0.0
    assert gm.gradient(ex1_game(), 0, np.zeros(6)) == -62.0


def test_index_checked():
    with pytest.raises(IndexError):
        gm.gradient(ex1_game(), 6, np.zeros(6))
    with pytest.raises(IndexError):
        gm.partial_map(ex1_game(), -1, 0.0, 0.0)


def test_model_validation():
    with pytest.raises(ValueError):
        gm.AggregativeCost(0.0, 0, 0, 1, 0)
    with pytest.raises(ValueError):
        gm.AggregativeCost(1.0, 0, 0, 1, -0.1)
    c1 = gm.AggregativeCost(1, 0, 0, 1, 0.5)
    c2 = gm.AggregativeCost(1, 0, 0, 2, 0.5)
    with pytest.raises(ValueError):
        gm.GameModel((c1, c2))


def test_partial_map_examples():
    g = ex1_game()
    y = np.arange(6.0)
    for i in range(6):
        assert gm.partial_map(g, i, y[i], y.sum()) == gm.gradient(g, i, y)
    dec = gm.GameModel.from_arrays([1, 2], [0, 1], [0, 0], 3, 0.0)
    assert gm.partial_map(dec, 0, 1.0, 5.0) == gm.partial_map(dec, 0, 1.0, -7.0)
    assert abs(abs(gm.partial_map(g, 2, 1.0, 4.0) - gm.partial_map(g, 2, 1.0, 1.5)) - 0.5 * 2.5) < 1e-12


def test_pseudo_gradient_examples():
    g = ex1_game()
    y_star = gm.nash_equilibrium(g)
    assert np.abs(gm.pseudo_gradient(g, y_star)).max() <= 1e-9
    assert np.allclose(gm.pseudo_gradient(single(), [3.0]), [2.0])
    rng = np.random.default_rng(0)
    for _ in range(20):
        y, y2 = rng.normal(size=(2, 6)) * 10
        assert np.allclose(gm.pseudo_gradient(g, y) - gm.pseudo_gradient(g, y2), g.jacobian @ (y - y2))


def test_nash_equilibrium_examples():
    assert np.allclose(gm.nash_equilibrium(single()), [1.0])
    g = ex1_game()
    y_star = gm.nash_equilibrium(g)
    assert np.allclose(y_star, EXAMPLE1_NE, atol=1e-8)
    assert np.allclose(y_star, aggregate_ne(g.xi, g.beta, g.p0, g.a), atol=1e-12)
    j_star = [gm.cost(g, i, y_star) for i in range(6)]
    for i in range(6):
        for dv in (0.1, -0.1):
            y = y_star.copy()
            y[i] += dv
            assert gm.cost(g, i, y) > j_star[i]


def test_monotonicity_certificate_examples():
    g = gm.GameModel.from_arrays(np.ones(4), np.zeros(4), np.zeros(4), 1.0, 0.0)
    cert = gm.monotonicity_certificate(g)
    assert cert.mu == pytest.approx(2.0) and cert.theta == 0.0 and cert.passed
    cert = gm.monotonicity_certificate(ex1_game())
    assert cert.mu > 0 and cert.theta == 0.5


def test_monotonicity_inequality_1000_pairs():
    g = ex1_game()
    mu = gm.monotonicity_certificate(g).mu
    rng = np.random.default_rng(42)
    for _ in range(1000):
        y, y2 = rng.normal(scale=20, size=(2, 6))
        dy = y - y2
        lhs = dy @ (gm.pseudo_gradient(g, y) - gm.pseudo_gradient(g, y2))
        assert lhs >= mu * (dy @ dy) - 1e-9 * (1 + abs(lhs))


def test_price_form_matches_direct_cost():
    g = ex1_game()
    rng = np.random.default_rng(7)
    for _ in range(50):
        y = rng.normal(scale=10, size=6)
        sigma = y.sum()
        for i in range(6):
            direct = A1[i] * (y[i] - B1[i]) ** 2 - (50 - 0.5 * sigma) * y[i]
            assert abs(gm.cost(g, i, y) - direct) <= 1e-12 * max(1.0, abs(direct)) * 10


@settings(max_examples=80, deadline=None)
@given(games(), st.integers(0, 2**31 - 1))
def test_gradient_matches_finite_difference(g, seed):
    y = np.random.default_rng(seed).normal(scale=10, size=g.n)
    eps = 1e-5
    for i in range(g.n):
        yp, ym = y.copy(), y.copy()
        yp[i] += eps
        ym[i] -= eps
        fd = (gm.cost(g, i, yp) - gm.cost(g, i, ym)) / (2 * eps)
        grad = gm.gradient(g, i, y)
        assert abs(grad - fd) <= 1e-6 * (1 + abs(grad)) + 1e-7 * max(1.0, abs(gm.cost(g, i, y)))


@settings(max_examples=80, deadline=None)
@given(games())
def test_oracle_optimality(g):
    y_star = gm.nash_equilibrium(g)
    scale = 1 + np.abs(g.beta).max() + g.p0
    assert np.abs(gm.pseudo_gradient(g, y_star)).max() <= 1e-8 * scale
    assert np.allclose(y_star, aggregate_ne(g.xi, g.beta, g.p0, g.a), rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(games(), st.integers(0, 2**31 - 1))
def test_strong_monotonicity_property(g, seed):
    mu = gm.monotonicity_certificate(g).mu
    rng = np.random.default_rng(seed)
    y, y2 = rng.normal(scale=10, size=(2, g.n))
    dy = y - y2
    lhs = dy @ (gm.pseudo_gradient(g, y) - gm.pseudo_gradient(g, y2))
    assert lhs >= mu * (dy @ dy) * (1 - 1e-9) - 1e-9
