"""Empirical bi-Lipschitz distortion and Assouad-dimension estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Union

import numpy as np

from . import model_metric as mm
from .builders import BuildResult, image_bracket
from .curves import MetricCurve, ModelCircle
from .diameter import DiameterFunction
from .errors import CorrespondenceError, DomainError

Real = Union[Fraction, float]
Bracket = tuple[float, float]
Oracle = Callable[[Real, Real], Bracket]


def as_oracle(metric: Any, depth: int = 24) -> Oracle:
    """Wrap a curve, a diameter function or a callable as (s, t) -> (lower, upper)."""
    if isinstance(metric, DiameterFunction):
        fast = metric.as_float()
        return lambda s, t: _pair(mm.distance(fast, s, t, depth))
    if isinstance(metric, ModelCircle):
        return lambda s, t: _pair(mm.distance(metric.float_df, s, t, metric._depth_for(s, t)))
    if isinstance(metric, MetricCurve):
        return lambda s, t: _pair(metric.distance(s, t))
    if callable(metric):
        return lambda s, t: _pair(metric(s, t))
    raise DomainError(f"cannot query distances on {type(metric).__name__}")


def _pair(v: Any) -> Bracket:
    if isinstance(v, mm.MetricBracket):
        return float(v.lower), float(v.upper)
    if isinstance(v, tuple):
        return float(v[0]), float(v[1])
    return float(v), float(v)


@dataclass
class DistortionReport:
    pairs: int
    up: float
    down: float
    L_est: float
    violations: int
    bound: float | None
    bracket_slack: float
    histogram: list[int]
    bin_edges: list[float]
    skipped: int = 0
    worst_pairs: list[tuple[float, float, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "L_est": self.L_est,
            "pairs": self.pairs,
            "up": self.up,
            "down": self.down,
            "violations": self.violations,
            "bound": self.bound,
            "bracket_slack": self.bracket_slack,
            "histogram": self.histogram,
            "bin_edges": self.bin_edges,
            "skipped": self.skipped,
        }


def sample_pairs(pairs: int, seed: int, grid: int = 2**10) -> list[tuple[Real, Real]]:
    """Half the pairs on grid endpoints k/grid (exact), half uniform."""
    rng = np.random.default_rng(seed)
    out: list[tuple[Real, Real]] = []
    n_grid = pairs // 2
    while len(out) < n_grid:
        i, j = rng.integers(0, grid, 2)
        if i != j:
            out.append((Fraction(int(i), grid), Fraction(int(j), grid)))
    while len(out) < pairs:
        s, t = rng.random(2)
        if s != t:
            out.append((float(s), float(t)))
    return out


Correspondence = Callable[[Real], Union[Real, tuple[Real, float]]]


def _image(corr: Correspondence | None, s: Real) -> tuple[Real, float]:
    if corr is None:
        return s, 0.0
    v = corr(s)
    return (v[0], float(v[1])) if isinstance(v, tuple) else (v, 0.0)


def bilip_report(
    metric_a: Any,
    metric_b: Any,
    correspondence: Correspondence | None = None,
    pairs: int = 1000,
    seed: int = 0,
    bound: float | None = None,
    grid: int = 2**10,
    depth: int = 24,
) -> DistortionReport:
    """Ratios d_b(f(s), f(t)) / d_a(s, t) over stratified sample pairs.

    ``up`` is the largest lower end of a ratio bracket and ``down`` the
    smallest upper end, so L_est = max(up, 1/down) never overstates the
    distortion; with exact metrics it is the plain sampled distortion.

    ``correspondence`` may return a parameter or (parameter, radius); the radius
    bounds how far the true image can sit from that parameter in metric b.
    A violation is counted only when the whole ratio bracket lies outside
    [1/bound, bound].
    """
    qa, qb = as_oracle(metric_a, depth), as_oracle(metric_b, depth)
    ratios, logs = [], []
    violations = skipped = 0
    slack = 0.0
    for s, t in sample_pairs(pairs, seed, grid):
        la, ha = qa(s, t)
        (fs, rs), (ft, rt) = _image(correspondence, s), _image(correspondence, t)
        lb, hb = qb(fs, ft)
        lb, hb = max(lb - rs - rt, 0.0), hb + rs + rt
        if ha == 0:
            if lb > 0:
                raise CorrespondenceError(f"points {s}, {t} coincide in the first metric but not in the second")
            skipped += 1
            continue
        if hb == 0:
            raise CorrespondenceError(f"images of {s}, {t} coincide but the points do not")
        r_lo, r_hi = lb / ha, (hb / la if la > 0 else math.inf)
        ratios.append((r_lo, r_hi, float(s), float(t)))
        logs.append(math.log(((lb + hb) / 2) / ((la + ha) / 2)))
        if r_lo > 0:
            slack = max(slack, math.log(r_hi / r_lo))
        else:
            slack = math.inf
        if bound is not None and (r_lo > bound or r_hi < 1 / bound):
            violations += 1
    if not ratios:
        raise DomainError("no usable pairs")
    # the least distortion consistent with every ratio bracket
    up = max(r[0] for r in ratios)
    down = min(r[1] for r in ratios)
    hist, edges = np.histogram(np.array(logs), bins=20)
    worst = sorted(ratios, key=lambda r: -max(r[0], 1 / r[1]))[:5]
    return DistortionReport(
        len(ratios),
        up,
        down,
        max(up, 1 / down, 1.0),
        violations,
        bound,
        slack,
        hist.tolist(),
        edges.tolist(),
        skipped,
        worst,
    )


def build_distortion(result: BuildResult, pairs: int = 10**4, seed: int = 0) -> DistortionReport:
    """Distortion of the tree correspondence from the built model onto the normalized curve."""
    model = result.tree_model
    grid = result.tree.base ** result.tree.depth
    depth = model.base_exponent * result.tree.depth + 16
    return bilip_report(
        model,
        result.curve,
        lambda s: image_bracket(result, s),
        pairs,
        seed,
        float(result.constants["L"]),
        grid,
        depth,
    )


# --- Assouad dimension -----------------------------------------------------


@dataclass
class AssouadEstimate:
    alpha: float
    intercept: float
    residuals: list[float]
    ratios: list[float]
    counts: list[int]
    points: int
    resolution: float
    degenerate: bool

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


RowOracle = Callable[[int], np.ndarray]


def _grid_rows(metric: Any, level: int) -> tuple[int, RowOracle, float]:
    """Row oracle for distances between the points i/2^level, and the largest neighbour gap."""
    if isinstance(metric, ModelCircle):
        metric = metric.df
    if isinstance(metric, DiameterFunction):
        df = metric.as_float()
        levels = max(level // df.base_exponent, 1)
        return df.base**levels, lambda i: mm.grid_distance_rows(df, levels, np.array([i]))[0], float(
            df.level_values(levels).max()
        )
    if isinstance(metric, MetricCurve):
        n = 2**level
        ts = np.arange(n) / n
        gap = float(metric.distances(ts, np.roll(ts, -1)).max())
        return n, lambda i: metric.distances(np.full(n, ts[i]), ts), gap
    raise DomainError(f"cannot estimate dimension of {type(metric).__name__}")


def _net_corners(row: RowOracle, center: int, radius: float, floor: float, cap: int) -> list[tuple[float, int]]:
    """(r, size of the greedy r-net) at each distinct farthest-point radius inside B(center, radius)."""
    d0 = row(center)
    members = np.flatnonzero(d0 <= radius)
    near = d0[members].copy()
    radii = []
    for _ in range(cap):
        j = int(np.argmax(near))
        if near[j] < floor:
            break
        radii.append(near[j])
        near = np.minimum(near, row(int(members[j]))[members])
    r = np.array(radii)
    complete = r.size < cap
    out = []
    for v in np.unique(np.round(r, 12)):
        if not complete and v <= r[-1] * (1 + 1e-9):
            continue  # the net was cut off before this scale was exhausted
        out.append((float(v), int((r >= v * (1 - 1e-9)).sum()) + 1))
    return out


def assouad_estimate(
    metric: Any,
    samples: int = 2,
    seed: int = 0,
    level: int = 13,
    ball_fractions: tuple[float, ...] = (1.0, 0.5),
    cap: int = 2048,
    min_ratio: float = 2.0,
) -> AssouadEstimate:
    """Slope of log(net size) against log(R / r) for greedy r-nets in sampled balls B(x, R).

    Net sizes are read at the corners of the farthest-point radius staircase and
    the largest size per quarter octave of R/r is kept, as the definition takes
    a supremum over balls. Scales below two grid gaps are dropped.
    """
    n, row, gap = _grid_rows(metric, level)
    rng = np.random.default_rng(seed)
    centers = [0] + [int(c) for c in rng.choice(np.arange(1, n), size=max(samples - 1, 0), replace=False)]
    diam = max(float(row(c).max()) for c in centers)
    floor = 2 * gap
    best: dict[int, tuple[float, int]] = {}
    for c in centers:
        for frac in ball_fractions:
            R = diam * frac
            for r, size in _net_corners(row, c, R, floor, cap):
                rho = R / r
                key = math.floor(4 * math.log2(rho))
                if rho >= min_ratio and size > best.get(key, (0.0, 0))[1]:
                    best[key] = (rho, size)
    rows = [best[k] for k in sorted(best)]
    if len(rows) < 3:
        return AssouadEstimate(math.nan, math.nan, [], [], [], n, floor, True)
    x = np.log([r for r, _ in rows])
    y = np.log([c for _, c in rows])
    slope, icept = np.polyfit(x, y, 1)
    resid = y - (slope * x + icept)
    return AssouadEstimate(
        float(slope),
        float(icept),
        resid.tolist(),
        [r for r, _ in rows],
        [c for _, c in rows],
        n,
        floor,
        bool(x.max() - x.min() < math.log(10)),
    )
