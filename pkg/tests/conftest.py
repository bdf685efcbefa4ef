import cmath
import math
from fractions import Fraction

import pytest

from snowcircles import ChoiceSource, DiameterFunction


def model(sigma, rule="all_snow", m=1, horizon=None, **kw) -> DiameterFunction:
    return DiameterFunction(Fraction(sigma), ChoiceSource.named(rule, **kw), m, halving_horizon=horizon)


@pytest.fixture
def half():
    return model(Fraction(1, 2), "all_half")


@pytest.fixture
def extremal():
    return model(Fraction(7, 10))


@pytest.fixture
def alternating():
    return model(1, "alternating", horizon=2)


def koch(levels: int) -> list[complex]:
    """Classical Koch iteration on the counterclockwise unit square, bumps pointing outward."""
    pts = [0j, 1 + 0j, 1 + 1j, 1j]
    turn = cmath.rect(1, -math.pi / 3)
    for _ in range(levels - 1):
        nxt = []
        for a, b in zip(pts, pts[1:] + pts[:1]):
            d = (b - a) / 3
            nxt += [a, a + d, a + d + d * turn, a + 2 * d]
        pts = nxt
    return pts
