import math
from fractions import Fraction as F

import pytest

from conftest import model
from snowcircles import ModelCircle, RoundCircle, SnowflakePower, build_theorem_a
from snowcircles.errors import CorrespondenceError
from snowcircles.verify import assouad_estimate, bilip_report, build_distortion, sample_pairs


def test_sample_pairs_deterministic():
    a, b = sample_pairs(50, 3), sample_pairs(50, 3)
    assert a == b and len(a) == 50
    assert all(isinstance(s, F) for s, _ in a[:25])
    assert all(s != t for s, t in a)


def test_identity():
    rep = bilip_report(RoundCircle(), RoundCircle(), pairs=200)
    assert rep.L_est == pytest.approx(1.0, abs=1e-12) and rep.violations == 0


def test_half_model_is_arclength(half):
    rep = bilip_report(half, SnowflakePower(1.0), pairs=400, depth=40)
    assert rep.L_est == pytest.approx(1.0, abs=1e-9)
    assert rep.bracket_slack < 1e-6


def test_scaled_metric():
    twice = lambda s, t: 2 * RoundCircle().distance(s, t)
    rep = bilip_report(RoundCircle(), twice, pairs=100, bound=1.5)
    assert rep.L_est == pytest.approx(2.0) and rep.violations == 100


def test_correspondence_errors():
    with pytest.raises(CorrespondenceError):
        bilip_report(RoundCircle(), RoundCircle(), lambda s: 0.0, pairs=10)


def test_build_distortion_small():
    res = build_theorem_a(RoundCircle(), depth=6)
    rep = build_distortion(res, pairs=400)
    assert rep.violations == 0
    assert 1 <= rep.L_est <= 8


def test_assouad_round_circle():
    est = assouad_estimate(RoundCircle(), level=11)
    assert not est.degenerate
    assert est.alpha == pytest.approx(1.0, abs=0.1)


def test_assouad_snowflake_power():
    est = assouad_estimate(SnowflakePower(0.5), level=11)
    assert est.alpha == pytest.approx(2.0, abs=0.25)


def test_assouad_model(half):
    est = assouad_estimate(ModelCircle(half), level=11)
    assert est.alpha == pytest.approx(1.0, abs=0.1)
    assert math.isfinite(est.intercept)
