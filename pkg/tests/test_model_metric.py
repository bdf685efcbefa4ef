import itertools
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import model
from snowcircles import DyadicArc, GeneralArc, arc_diameter, brute_force_distance, distance
from snowcircles.model_metric import bracket_arcs, circle_diameter, cover_cost, grid_distance_matrix

A = DyadicArc


def lam(x, y):
    d = abs(x - y) % 1
    return min(d, 1 - d)


def test_distance_examples(half, extremal):
    assert distance(half, F(1, 8), F(3, 8), 6).lower == distance(half, F(1, 8), F(3, 8), 6).upper == F(1, 4)
    for depth in (1, 3, 8):
        b = distance(extremal, 0, F(1, 2), depth)
        assert b.lower == b.upper == F(7, 10)
    assert distance(extremal, F(3, 16), F(3, 16), 4).upper == 0


def test_brute_force_examples(half, extremal):
    assert brute_force_distance(half, 0, F(1, 4), 4) == F(1, 4)
    assert brute_force_distance(extremal, 0, F(1, 2), 3) == F(7, 10)
    for df in (half, extremal, model(F(9, 10), "random_bernoulli", seed=4)):
        assert brute_force_distance(df, 0, F(1, 16), 4) <= df.value(A(4, 0))
    assert brute_force_distance(extremal, 0, F(1, 16), 4) == extremal.value(A(4, 0))


@pytest.mark.parametrize("rule, sigma, kw", [("random_bernoulli", F(7, 10), {"seed": 1}), ("alternating", F(1), {"horizon": 2})])
def test_matches_oracle_on_grid(rule, sigma, kw):
    df = model(sigma, rule, **kw)
    pts = [F(k, 16) for k in range(16)]
    for x, y in itertools.combinations(pts, 2):
        assert distance(df, x, y, 6).upper == brute_force_distance(df, x, y, 6)


def test_one_bounded_turning(extremal):
    # distance equals the smaller of the two complementary arc diameters
    pts = [F(k, 16) for k in range(16)]
    for x, y in itertools.combinations(pts, 2):
        d = distance(extremal, x, y, 8).upper
        a1, a2 = arc_diameter(extremal, GeneralArc(x, y), 8), arc_diameter(extremal, GeneralArc(y, x), 8)
        assert d == min(a1.upper, a2.upper)


def test_bracket_arcs_examples(half):
    ab = bracket_arcs(half, GeneralArc(F(0), F(3, 4)))
    assert ab.inner_left == ab.inner_right == A(1, 0)
    assert ab.outer_left == A(0, 0) and ab.delta_star == F(1, 2)
    ab = bracket_arcs(half, GeneralArc(F(3, 8), F(5, 8)))
    assert (ab.inner_left, ab.inner_right) == (A(3, 3), A(3, 4))
    assert (ab.outer_left, ab.outer_right) == (A(2, 1), A(2, 2))
    assert ab.delta_star == F(1, 8)
    ab = bracket_arcs(half, GeneralArc(F(1, 4), F(1, 2)))
    assert ab.inner_left == ab.inner_right == A(2, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 255), st.integers(1, 255), st.integers(0, 3))
def test_bracket_arcs_contract(i, n, seed):
    df = model(F(3, 4), "random_bernoulli", seed=seed)
    a = F(i, 256)
    arc = GeneralArc(a, a + F(n, 256))
    ab = bracket_arcs(df, arc)
    for I in (ab.inner_left, ab.inner_right):
        assert arc.contains_arc(I)
    assert ab.outer_left == ab.inner_left.parent() and ab.outer_right == ab.inner_right.parent()
    # Δ* is the largest value of a grid arc inside A
    inside = [A(g, k) for g in range(1, 9) for k in range(2**g) if arc.contains_arc(A(g, k))]
    assert ab.delta_star == max(df.value(I) for I in inside)


def test_arc_diameter_examples(half, extremal):
    assert arc_diameter(extremal, A(2, 1), 8).lower == F(49, 100)
    b = arc_diameter(half, GeneralArc(F(3, 8), F(5, 8)), 4)
    assert b.lower == b.upper == F(1, 4)
    assert half.value(A(0, 0)) == 1
    c = circle_diameter(extremal, 12)
    assert c.upper <= 1 + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0.001, 0.999), st.integers(0, 3))
def test_arc_sandwich(a, length, seed):
    for m, tau in ((1, F(7, 10)), (2, F(3, 10))):
        df = model(tau, "random_bernoulli", m=m, seed=seed)
        arc = GeneralArc(a, (a + length) % 1)
        star = float(bracket_arcs(df, arc).delta_star)
        b = arc_diameter(df, arc, 40)
        assert star * (1 - 1e-12) <= float(b.lower) <= float(b.upper) <= 2 ** (m + 1) * star * (1 + 1e-12)


@given(st.integers(0, 2**20 - 1), st.integers(0, 2**20 - 1))
def test_lambda_recovery(i, j, ):
    half = model(F(1, 2), "all_half")
    x, y = F(i, 2**20), F(j, 2**20)
    b = distance(half, x, y, 24)
    assert b.lower == b.upper == lam(x, y)


def test_float_points_bracket(extremal):
    rng = np.random.default_rng(0)
    for x, y in rng.random((30, 2)):
        b = distance(extremal, float(x), float(y), 30)
        assert b.lower <= b.upper
        assert b.width < 1e-4


def test_grid_matrix_matches_distance():
    df = model(F(4, 5), "random_bernoulli", seed=7)
    mat = grid_distance_matrix(df, 5)
    for i, j in [(0, 5), (3, 29), (17, 18), (1, 16)]:
        assert mat[i, j] == pytest.approx(float(distance(df, F(i, 32), F(j, 32), 5).upper), rel=1e-12)


def test_cover_cost_whole_arc(half):
    assert cover_cost(half, GeneralArc(F(1, 4), F(3, 4)), 4) == F(1, 2)


@pytest.mark.parametrize("a", [4.579030701898493e-300, 5e-324])
def test_arc_nearly_filling_its_parent(extremal, a):
    # J has to sit in a sliver of width a next to Î
    arc = GeneralArc(a, a + 0.5)
    ab = bracket_arcs(extremal, arc)
    assert arc.contains_arc(ab.inner_right) and ab.inner_right.generation > 900
    b = arc_diameter(extremal, arc, 40)
    assert b.lower <= 0.7 <= b.upper
