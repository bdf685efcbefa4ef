"""Acceptance suite: one check per criterion, each printing a PASS or FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import math
import sys
import time
from fractions import Fraction as F
from pathlib import Path
from typing import Callable

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import koch, model  # noqa: E402
from snowcircles import (  # noqa: E402
    ChoiceSource,
    DiameterFunction,
    DyadicArc,
    GeneralArc,
    ModelCircle,
    RoundCircle,
    arc_diameter,
    assouad_upper,
    brute_force_distance,
    build_theorem_a,
    build_theorem_b,
    distance,
    doubling_test,
    extend_to_dyadic,
)
from snowcircles import model_metric as mm  # noqa: E402
from snowcircles import rohde  # noqa: E402
from snowcircles.verify import assouad_estimate, build_distortion  # noqa: E402

Check = Callable[[], tuple[bool, str]]
CRITERIA: dict[int, tuple[str, Check]] = {}
ROHDE_PS = (F(26, 100), F(1, 3), F(45, 100))


def criterion(number: int, title: str) -> Callable[[Check], Check]:
    def register(fn: Check) -> Check:
        CRITERIA[number] = (title, fn)
        return fn

    return register


def rohde_model(p: F) -> DiameterFunction:
    return DiameterFunction(p, ChoiceSource.named("random_bernoulli", seed=17), 2)


@criterion(1, "distance() equals the exhaustive chain oracle")
def oracle_equivalence() -> tuple[bool, str]:
    t0 = time.perf_counter()
    fixtures = [
        model(F(1, 2), "all_half"),
        model(F(7, 10), "random_bernoulli", seed=1),
        model(F(9, 10), "random_bernoulli", seed=2),
        model(1, "alternating", horizon=2),
    ]
    pts = [F(k, 16) for k in range(16)]
    pairs = mismatches = 0
    for df in fixtures:
        for x, y in itertools.combinations(pts, 2):
            pairs += 1
            mismatches += distance(df, x, y, 8).upper != brute_force_distance(df, x, y, 8)
    dt = time.perf_counter() - t0
    return mismatches == 0 and pairs == 480 and dt < 30, f"{pairs} pairs, {mismatches} mismatches, {dt:.1f} s"


@criterion(2, "diam(I) = Δ(I) for grid arcs of generations 1..5")
def grid_arc_diameters() -> tuple[bool, str]:
    t0 = time.perf_counter()
    fixtures = [model(F(7, 10)), model(F(4, 5), "random_bernoulli", seed=3), model(1, "alternating", horizon=2)]
    bad = arcs = 0
    for df in fixtures:
        grid = mm.grid_distance_matrix(df, 8)
        for n in range(1, 6):
            for k in range(2**n):
                arcs += 1
                I = DyadicArc(n, k)
                delta = df.value(I)
                # endpoints realize Δ(I), both by the fast path and the exhaustive oracle
                ends = distance(df, I.start, I.end % 1, 8)
                lo, hi = k << (8 - n), (k + 1) << (8 - n)
                idx = np.arange(lo, hi + 1) % 256
                sup = float(grid[np.ix_(idx, idx)].max())
                ok = ends.lower == ends.upper == delta and sup <= float(delta) * (1 + 1e-12)
                ok = ok and arc_diameter(df, GeneralArc.of(I), 8).lower == delta
                if n <= 3:
                    ok = ok and brute_force_distance(df, I.start, I.end % 1, n + 3) == delta
                bad += not ok
    dt = time.perf_counter() - t0
    return bad == 0 and dt < 10, f"{arcs} arcs, {bad} failures, {dt:.1f} s"


@criterion(3, "σ = 1/2 all-HALF model reproduces the arc-length metric")
def lambda_recovery() -> tuple[bool, str]:
    df = model(F(1, 2), "all_half")
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 31))
        i, j = (int(v) for v in rng.integers(0, 2**n, 2))
        x, y = F(i, 2**n), F(j, 2**n)
        lam = min(abs(x - y), 1 - abs(x - y))
        b = distance(df, x, y, 32)
        worst = max(worst, abs(float(b.lower) - float(lam)), abs(float(b.upper) - float(lam)))
    return worst <= 1e-9, f"1000 pairs, max |d - λ| = {worst:.2e}"


@criterion(4, "Δ*(A) <= diam(A) <= 2^(m+1) Δ*(A) on random arcs")
def arc_sandwich() -> tuple[bool, str]:
    rng = np.random.default_rng(4)
    details = []
    ok = True
    for m, tau, seed in ((1, F(7, 10), 1), (2, F(3, 10), 2)):
        df = model(tau, "random_bernoulli", m=m, seed=seed)
        bad = 0
        for i in range(1000):
            if i % 2:
                n = int(rng.integers(1, 14))
                a, b = (int(v) for v in rng.choice(2**n, 2, replace=False))
                arc = GeneralArc(F(a, 2**n), F(b, 2**n))
            else:
                a, b = rng.random(2)
                arc = GeneralArc(float(a), float(b))
            star = mm.bracket_arcs(df, arc).delta_star
            br = arc_diameter(df, arc, 40)
            bad += not (star <= br.lower <= br.upper <= 2 ** (m + 1) * star)
        ok &= bad == 0
        details.append(f"m={m}: {bad}/1000 outside")
    return ok, ", ".join(details)


@criterion(5, "4-adic metric and its dyadic extension are comparable")
def extension_comparability() -> tuple[bool, str]:
    coarse = model(F(3, 10), "random_bernoulli", m=2, seed=5)
    fine = extend_to_dyadic(coarse)
    rng = np.random.default_rng(5)
    bad = 0
    for _ in range(500):
        n = int(rng.integers(1, 7))
        i, j = rng.choice(4**n, 2, replace=False)
        x, y = F(int(i), 4**n), F(int(j), 4**n)
        dj = distance(coarse, x, y, 16)
        di = distance(fine, x, y, 16)
        # fails only if no values inside the two brackets satisfy the inequality
        bad += di.lower > dj.upper or di.upper < dj.lower / 4
    return bad == 0, f"500 pairs, {bad} violations, extension parameter {float(fine.parameter):.6f}"


@criterion(6, "binary build on the round circle: sandwich and distortion <= 8")
def theorem_a_round() -> tuple[bool, str]:
    res = build_theorem_a(RoundCircle(), depth=10)
    bad = 0
    for n, k, delta, diam in res.sandwich_log:
        s, e = res.tree.arc(n, k)
        chord = math.sin(math.pi * min(float(e - s), 0.5))
        inside = delta / 2 <= chord * (1 + 1e-12) and chord <= 2 * delta * (1 + 1e-12)
        bad += abs(chord - diam) > 1e-12 or not inside
    arcs = len(res.sandwich_log)
    rep = build_distortion(res, pairs=10**4)
    ok = bad == 0 and arcs == 2**11 - 2 and rep.L_est <= 8 and rep.violations == 0
    return ok, f"{arcs} arcs, {bad} sandwich failures, L_est = {rep.L_est:.4f}, {rep.violations} violations"


@criterion(7, "binary build on the extremal σ = 0.7 model: distortion <= 8")
def theorem_a_extremal() -> tuple[bool, str]:
    res = build_theorem_a(ModelCircle(model(F(7, 10))), depth=6)
    rep = build_distortion(res, pairs=10**4)
    return rep.L_est <= 8 and rep.violations == 0, f"L_est = {rep.L_est:.4f}, {rep.violations} violations"


@criterion(8, "M-ary build, σ = 4/5, m = 4: constants, K-sandwich, distortion <= ML")
def theorem_b_round() -> tuple[bool, str]:
    res = build_theorem_b(RoundCircle(), F(4, 5), m=4, depth=3)
    c = res.constants
    K, L, ML = float(c["K"]), float(c["L"]), float(c["ML"])
    consts = abs(K - 6.5536) <= 1e-12 and abs(L - 209.7152) <= 1e-12 and abs(ML - 3355.4432) <= 1e-9
    bad = sum(not (d / K <= diam * (1 + 1e-9) and diam <= K * d * (1 + 1e-9)) for _, _, d, diam in res.sandwich_log)
    rep = build_distortion(res, pairs=10**4)
    ok = consts and bad == 0 and rep.L_est <= ML
    return ok, f"K = {K}, L = {L}, {bad} sandwich failures over {len(res.sandwich_log)} arcs, L_est = {rep.L_est:.4f}"


@criterion(9, "p = 1/3 all-SNOW polygon is the Koch snowflake")
def koch_coincidence() -> tuple[bool, str]:
    poly = rohde.generate(F(1, 3), ChoiceSource.named("all_snow"), 3)[-1]
    gap = float(np.max(np.abs(poly.vertices - np.array(koch(3)))))
    return gap <= 1e-12 and poly.vertices.size == 64, f"64 vertices, max gap {gap:.1e}"


@criterion(10, "snowflake polygons: edge diameters, nesting, separation")
def rohde_geometry() -> tuple[bool, str]:
    ok, worst_gap, worst_sep = True, 0.0, math.inf
    for p in ROHDE_PS:
        polys = rohde.generate(p, rohde_model(p), 6)
        for poly in polys:
            gap = rohde.check_diameters(poly)
            worst_gap = max(worst_gap, gap)
            ok &= gap <= 1e-12
        for parent, child in zip(polys, polys[1:]):
            env = rohde.triangles(parent, p, child)
            ok &= env.nested and env.min_separation_ratio >= env.c_p
            worst_sep = min(worst_sep, env.min_separation_ratio - env.c_p)
    return ok, f"max diameter gap {worst_gap:.1e}, min separation margin {worst_sep:.4f}"


@criterion(11, "φ bracket on level-4 endpoints and BT ratios at level 6")
def phi_and_bt() -> tuple[bool, str]:
    ok, notes = True, []
    for p in ROHDE_PS:
        df = rohde_model(p)
        polys = rohde.generate(p, df, 6)
        rep = rohde.phi_bracket(p, df, polys[3])
        bt = rohde.bt_ratios(polys[5], samples=500)
        ok &= rep.violations == 0 and rep.pairs == 256 * 255 // 2 and bt <= rohde.bt_constant(p)
        notes.append(f"p={float(p):.2f}: {rep.violations} violations, BT {bt:.2f}/{rohde.bt_constant(p):.1f}")
    return ok, "; ".join(notes)


@criterion(12, "doubling classifier")
def doubling() -> tuple[bool, str]:
    ok = True
    for s in ("0.6", "0.7", "0.8", "0.9"):
        res = doubling_test(model(F(s)), 64)
        ok &= res.status == "doubling" and res.n0 == math.ceil(math.log(2) / math.log(1 / float(s)))
    alt = doubling_test(model(1, "alternating", horizon=2), 64)
    runs = doubling_test(model(1, "growing_runs"), 64)
    ok &= (alt.status, alt.n0, alt.N) == ("doubling", 2, 16)
    ok &= runs.status == "not_doubling" and runs.witness is not None and runs.witness["length"] >= 64
    return ok, f"alternating n0={alt.n0} N={alt.N}, growing runs {runs.status}"


@criterion(13, "Assouad estimates and the upper bound")
def assouad() -> tuple[bool, str]:
    cases = [
        ("extremal σ=0.7", model(F(7, 10)), 1.94, 0.2),
        ("σ=1/2", model(F(1, 2), "all_half"), 1.0, 0.1),
        ("round circle", RoundCircle(), 1.0, 0.1),
    ]
    ok, notes = True, []
    for name, metric, target, tol in cases:
        est = assouad_estimate(metric)
        ok &= abs(est.alpha - target) <= tol
        notes.append(f"{name}: {est.alpha:.3f}")
    upper_err = max(abs(assouad_upper(model(F(s))) - math.log(2) / math.log(1 / float(F(s)))) for s in ("0.55", "0.7", "0.9"))
    ok &= upper_err <= 1e-12
    return ok, ", ".join(notes) + f", upper-bound error {upper_err:.1e}"


@criterion(14, "successive stages are within max Δ in Hausdorff distance")
def stage_convergence() -> tuple[bool, str]:
    ok, worst = True, 0.0
    for p in ROHDE_PS:
        polys = rohde.generate(p, rohde_model(p), 6)
        for parent, child in zip(polys, polys[1:]):
            h = rohde.hausdorff(parent, child)
            ok &= h.sampled <= h.certified + 1e-12 and h.certified <= h.max_delta
            worst = max(worst, h.certified / h.max_delta)
    return ok, f"largest distance / max Δ = {worst:.4f}"


def run(number: int) -> bool:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure, reported like one
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    status = "PASS" if ok else "FAIL"
    print(f"{status} criterion {number:2d}: {title} [{detail}] ({time.perf_counter() - t0:.1f} s)", flush=True)
    return ok


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number: int, capsys: pytest.CaptureFixture[str]) -> None:
    with capsys.disabled():
        print()
        ok = run(number)
    assert ok


if __name__ == "__main__":
    results = [run(n) for n in sorted(CRITERIA)]
    print(f"{sum(results)}/{len(results)} criteria pass")
    sys.exit(0 if all(results) else 1)
