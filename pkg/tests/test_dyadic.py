from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from snowcircles.dyadic import (
    CirclePoint,
    DyadicArc,
    GeneralArc,
    arc_navigate,
    arc_relation,
    canonical_cover,
    dyadic_level,
    grid_cover,
    parse_number,
)
from snowcircles.errors import DomainError, GridError


def A(n, k):
    return DyadicArc(n, k)


def test_navigation():
    assert arc_navigate(A(1, 0), "children") == [A(2, 0), A(2, 1)]
    assert arc_navigate(A(3, 5), "parent") == [A(2, 2)]
    assert arc_navigate(A(2, 3), "sibling") == [A(2, 2)]
    assert A(2, 1).children(2) == [A(4, 4), A(4, 5), A(4, 6), A(4, 7)]
    with pytest.raises(GridError):
        A(1, 0).children(2)
    with pytest.raises(DomainError):
        A(0, 0).sibling()


@pytest.mark.parametrize(
    "a, b, rel",
    [
        ((2, 0), (2, 3), "touch_at_endpoint"),
        ((1, 0), (2, 1), "a_contains_b"),
        ((2, 1), (1, 0), "b_contains_a"),
        ((2, 1), (2, 3), "disjoint"),
        ((3, 3), (3, 3), "equal"),
        ((2, 1), (2, 2), "touch_at_endpoint"),
    ],
)
def test_relation(a, b, rel):
    assert arc_relation(A(*a), A(*b)) == rel


@pytest.mark.parametrize(
    "start, end, cover",
    [
        (F(0), F(1, 2), [(1, 0)]),
        (F(1, 4), F(1), [(2, 1), (1, 1)]),
        (F(1, 8), F(7, 8), [(3, 1), (2, 1), (2, 2), (3, 6)]),
    ],
)
def test_canonical_cover_examples(start, end, cover):
    assert canonical_cover(GeneralArc(start, end), 3) == [A(*c) for c in cover]


def _brute_maximal(start: F, length: F, gen: int) -> set[DyadicArc]:
    """Maximal dyadic arcs inside the arc, by enumeration."""
    arc = GeneralArc(start, start + length) if length < 1 else None
    inside = {A(n, k) for n in range(1, gen + 1) for k in range(2**n) if arc.contains_arc(A(n, k))}
    return {I for I in inside if not any(J != I and arc_relation(J, I) == "a_contains_b" for J in inside)}


@given(st.integers(0, 31), st.integers(1, 31))
def test_canonical_cover_is_maximal_tiling(i, length):
    start, ln = F(i, 32), F(length, 32)
    cover = canonical_cover(GeneralArc(start, start + ln), 5)
    assert sum(I.length for I in cover) == ln
    assert set(cover) == _brute_maximal(start, ln, 5)
    # consecutive pieces abut
    for I, J in zip(cover, cover[1:]):
        assert I.end % 1 == J.start


def test_grid_cover_4adic():
    cover = grid_cover(F(1, 16), F(14, 16), 2, 2)
    assert all(I.generation % 2 == 0 for I in cover)
    assert sum(I.length for I in cover) == F(14, 16)
    with pytest.raises(GridError):
        grid_cover(F(1, 8), F(1, 2), 2, 1)


def test_points_and_parsing():
    assert parse_number("3/2^4") == F(3, 16)
    assert parse_number("0.25") == F(1, 4)
    assert CirclePoint(F(5, 4)).value == F(1, 4)
    assert CirclePoint(1.25).value == 0.25
    assert CirclePoint.parse("1/8").level == 3
    assert dyadic_level(F(1, 3)) is None
    with pytest.raises(DomainError):
        parse_number("abc")
    with pytest.raises(DomainError):
        GeneralArc(F(1, 4), F(5, 4))


def test_wrapping_arc():
    arc = GeneralArc(F(7, 8), F(1, 8))
    assert arc.length == F(1, 4)
    assert arc.contains(F(0)) and not arc.contains(F(1, 2))
    assert canonical_cover(arc, 3) == [A(3, 7), A(3, 0)]
