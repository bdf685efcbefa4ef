import math
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import model
from snowcircles import GeneralArc, ModelCircle, Polyline, RoundCircle, SnowflakePower, equal_diameter_split
from snowcircles.curves import (
    CallableCurve,
    arc_diam,
    bt_constant_estimate,
    curve_from_dict,
    diameter_distance,
    normalize,
)
from snowcircles.errors import DomainError

SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]
QUARTER_CHORD = math.sin(math.pi / 4)


def test_arc_diameters(extremal):
    assert arc_diam(RoundCircle(), GeneralArc(F(0), F(1, 4))) == pytest.approx(QUARTER_CHORD, abs=1e-7)
    assert arc_diam(Polyline(SQUARE), GeneralArc(F(0), F(1, 4))) == pytest.approx(1.0, abs=1e-12)
    assert arc_diam(ModelCircle(extremal), GeneralArc(F(1, 4), F(1, 2))) == pytest.approx(0.49, abs=1e-12)
    assert arc_diam(RoundCircle(), None) == 1.0
    with pytest.raises(DomainError):
        arc_diam(RoundCircle(), None, tol=0)


def test_generic_span_diam_matches_closed_form():
    generic = CallableCurve(RoundCircle().distance)
    assert generic.span_diam(0.1, 0.3) == pytest.approx(math.sin(0.3 * math.pi), rel=1e-9)


def test_diameter_distance():
    rc = RoundCircle()
    assert diameter_distance(rc, 0, F(1, 2)) == pytest.approx(1.0)
    assert diameter_distance(rc, 0, F(1, 4)) == pytest.approx(QUARTER_CHORD, abs=1e-7)
    assert diameter_distance(rc, F(1, 3), F(1, 3)) == 0
    # a polygon is not 1-BT: around a corner the arc is wider than the chord
    sq = Polyline(SQUARE)
    assert diameter_distance(sq, 0.2, 0.3) >= sq.distance(0.2, 0.3)


def test_bt_estimates(extremal):
    assert bt_constant_estimate(RoundCircle(), 200) == pytest.approx(1.0, abs=1e-9)
    assert bt_constant_estimate(ModelCircle(extremal), 40) == pytest.approx(1.0, abs=1e-6)
    assert bt_constant_estimate(Polyline(SQUARE), 200, seed=1) >= 1.0


def test_split_interval_metric():
    lam = SnowflakePower(1.0)
    s = equal_diameter_split(lam, GeneralArc(F(0), F(1, 2)), 3)
    assert s.points == pytest.approx([1 / 6, 1 / 3], abs=1e-9)


def test_split_round_circle():
    s = equal_diameter_split(RoundCircle(), None, 4)
    assert [float(p) for p in s.points] == pytest.approx([0.25, 0.5, 0.75], abs=1e-8)
    assert s.diameters == pytest.approx([QUARTER_CHORD] * 4, abs=1e-8)


def test_split_extremal_model(extremal):
    s = equal_diameter_split(ModelCircle(extremal), None, 2)
    assert s.points == [F(1, 2)]
    assert s.diameters == pytest.approx([0.7, 0.7], abs=1e-12)


def test_split_skewed_curve():
    # an asymmetric polygon forces a non-uniform split
    pts = [[0, 0], [3, 0], [3, 1], [0, 1]]
    s = equal_diameter_split(Polyline(pts), None, 3, tol=1e-9)
    assert s.relative_spread <= 1e-9
    assert s.points != pytest.approx([1 / 3, 2 / 3], abs=1e-3)


def test_split_rejects_small_n():
    with pytest.raises(DomainError):
        equal_diameter_split(RoundCircle(), None, 1)


def test_model_circle_distance(half):
    mc = ModelCircle(half, depth=32)
    rng = np.random.default_rng(1)
    for s, t in rng.random((20, 2)):
        d = abs(s - t)
        assert mc.distance(s, t) == pytest.approx(min(d, 1 - d), abs=1e-9)


def test_serialization(extremal):
    for c in (RoundCircle(), Polyline(SQUARE), SnowflakePower(0.5), ModelCircle(extremal)):
        back = curve_from_dict(c.to_dict())
        assert back.distance(0.1, 0.35) == pytest.approx(c.distance(0.1, 0.35), rel=1e-12)
    with pytest.raises(DomainError):
        curve_from_dict({"kind": "blob"})


def test_normalize():
    n = normalize(Polyline(SQUARE))
    assert n.diameter() == pytest.approx(1.0)
    assert normalize(n) is n
