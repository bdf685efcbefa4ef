"""Metric Jordan curves parameterized by the circle, and operations on their arcs.

Parameters live in [0,1); an arc is described by its start parameter and
its forward parameter length in (0, 1], so the whole curve is length 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Union

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import ConvexHull, QhullError

from . import model_metric as mm
from .diameter import DiameterFunction
from .dyadic import CirclePoint, GeneralArc, dyadic_level, format_number, parse_number
from .errors import DomainError, SplitError, ToleranceError

Real = Union[Fraction, float]


def _lam(s: Real, t: Real) -> float:
    d = abs(float(s) - float(t)) % 1.0
    return min(d, 1.0 - d)


class MetricCurve:
    """Base class: subclasses provide ``distance`` and may override ``span_diam``."""

    kind = "custom"
    exact_params = False
    one_bt = False  # True when every pair is joined by an arc of diameter equal to their distance

    def distance(self, s: Real, t: Real) -> float:
        raise NotImplementedError

    def distances(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.array([self.distance(a, b) for a, b in zip(s, t)])

    def span_diam(self, s: Real, length: Real, tol: float = 1e-9) -> float:
        """Diameter of the arc from s of parameter length ``length``, by grid doubling."""
        n, prev = 8, -1.0
        while n <= 1024:
            ts = (float(s) + float(length) * np.linspace(0.0, 1.0, n + 1)) % 1.0
            a, b = np.triu_indices(n + 1, 1)
            est = float(self.distances(ts[a], ts[b]).max())
            if prev >= 0 and est - prev <= tol * max(est, 1e-300):
                return est
            prev, n = est, n * 2
        raise ToleranceError(f"arc diameter did not stabilize within {n // 2 + 1} samples")

    def diameter(self) -> float:
        return self.span_diam(0.0, 1.0)

    def diametral_pair(self) -> tuple[Real, Real]:
        ts = np.arange(512) / 512
        a, b = np.triu_indices(512, 1)
        k = int(np.argmax(self.distances(ts[a], ts[b])))
        return float(ts[a[k]]), float(ts[b[k]])

    def to_dict(self) -> dict[str, Any]:
        raise DomainError(f"curves of kind {self.kind!r} cannot be serialized")


class RoundCircle(MetricCurve):
    """The circle of diameter 1 with the chordal metric."""

    kind = "round_circle"
    one_bt = True

    def distance(self, s: Real, t: Real) -> float:
        return math.sin(math.pi * _lam(s, t))

    def distances(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        d = np.abs(np.asarray(s, float) - np.asarray(t, float)) % 1.0
        return np.sin(np.pi * np.minimum(d, 1.0 - d))

    def span_diam(self, s: Real, length: Real, tol: float = 1e-9) -> float:
        return math.sin(math.pi * min(float(length), 0.5))

    def diameter(self) -> float:
        return 1.0

    def diametral_pair(self) -> tuple[Real, Real]:
        return Fraction(0), Fraction(1, 2)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


class SnowflakePower(MetricCurve):
    """The snowflaked circle with metric λ(s, t)^ε."""

    kind = "snowflake_power"
    one_bt = True

    def __init__(self, epsilon: float):
        if not 0 < epsilon <= 1:
            raise DomainError("epsilon must lie in (0, 1]")
        self.epsilon = float(epsilon)

    def distance(self, s: Real, t: Real) -> float:
        return _lam(s, t) ** self.epsilon

    def distances(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        d = np.abs(np.asarray(s, float) - np.asarray(t, float)) % 1.0
        return np.minimum(d, 1.0 - d) ** self.epsilon

    def span_diam(self, s: Real, length: Real, tol: float = 1e-9) -> float:
        return min(float(length), 0.5) ** self.epsilon

    def diameter(self) -> float:
        return 0.5**self.epsilon

    def diametral_pair(self) -> tuple[Real, Real]:
        return Fraction(0), Fraction(1, 2)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "epsilon": self.epsilon}


def _point_set_diameter(pts: np.ndarray) -> float:
    if len(pts) > 32:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # collinear input: fall through to brute force
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


class Polyline(MetricCurve):
    """A closed planar polygon, parameterized proportionally to arc length."""

    kind = "polyline"

    def __init__(self, points: list[list[float]] | np.ndarray):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise DomainError("a polyline needs at least three planar points")
        self.points = pts
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        if (seg == 0).any():
            raise DomainError("repeated consecutive vertices")
        self.knots = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
        self.knots[-1] = 1.0

    def point(self, t: Real | np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float) % 1.0
        closed = np.vstack([self.points, self.points[:1]])
        return np.stack([np.interp(t, self.knots, closed[:, 0]), np.interp(t, self.knots, closed[:, 1])], axis=-1)

    def distance(self, s: Real, t: Real) -> float:
        return float(np.linalg.norm(self.point(s) - self.point(t)))

    def distances(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.point(s) - self.point(t), axis=-1)

    def span_diam(self, s: Real, length: Real, tol: float = 1e-9) -> float:
        s, length = float(s) % 1.0, float(length)
        if length >= 1:
            return _point_set_diameter(self.points)
        inner = self.knots[:-1]
        off = (inner - s) % 1.0
        mask = (off > 0) & (off < length)
        pts = np.vstack([self.point(s)[None], self.points[mask], self.point(s + length)[None]])
        return _point_set_diameter(pts)

    def diameter(self) -> float:
        return _point_set_diameter(self.points)

    def diametral_pair(self) -> tuple[Real, Real]:
        diff = self.points[:, None, :] - self.points[None, :, :]
        d = np.sqrt((diff**2).sum(-1))
        i, j = np.unravel_index(int(np.argmax(d)), d.shape)
        i, j = sorted((int(i), int(j)))
        return float(self.knots[i]), float(self.knots[j])

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "points": self.points.tolist()}


class ModelCircle(MetricCurve):
    """The circle with the chain metric of a diameter function.

    Distances are bracket midpoints; they are exact whenever the parameters
    are grid points no deeper than ``depth`` (which grows to fit them).
    """

    kind = "model_circle"
    one_bt = True
    exact_params = True

    def __init__(self, df: DiameterFunction, depth: int = 16, grid_level: int = 9):
        self.df = df
        self.depth = depth
        self.grid_level = grid_level
        self._float_df: DiameterFunction | None = None

    def _depth_for(self, *params: Real) -> int:
        deepest = self.depth
        for p in params:
            lvl = dyadic_level(p) if isinstance(p, Fraction) else None
            if lvl is not None:
                deepest = max(deepest, lvl + (-lvl) % self.df.base_exponent)
        return deepest

    @property
    def float_df(self) -> DiameterFunction:
        """The same model with float weights (brackets widen by the float budget)."""
        if self._float_df is None:
            self._float_df = self.df.as_float()
        return self._float_df

    def distance_bracket(self, s: Real, t: Real) -> mm.MetricBracket:
        return mm.distance(self.df, CirclePoint(s), CirclePoint(t), self._depth_for(s, t))

    def distance(self, s: Real, t: Real) -> float:
        return mm.distance(self.float_df, CirclePoint(s), CirclePoint(t), self._depth_for(s, t)).mid

    def grid_distances(self) -> np.ndarray:
        levels = max(self.grid_level // self.df.base_exponent, 1)
        return mm.grid_distance_matrix(self.df, levels)

    def span_bracket(self, s: Real, length: Real) -> mm.MetricBracket:
        if length >= 1:
            return mm.circle_diameter(self.df, self.grid_level)
        arc = GeneralArc(CirclePoint(s), CirclePoint(s + length))
        return mm.arc_diameter(self.df, arc, self._depth_for(s, s + length))

    def span_diam(self, s: Real, length: Real, tol: float = 1e-9) -> float:
        if length >= 1:
            return self.span_bracket(s, length).mid
        # exact positions with float weights: the split search is dominated by rational arithmetic otherwise
        arc = GeneralArc(CirclePoint(s), CirclePoint(s + length))
        return mm.arc_diameter(self.float_df, arc, self._depth_for(s, s + length)).mid

    def diameter(self) -> float:
        s, t = self.diametral_pair()
        return self.distance(s, t)

    def diametral_pair(self) -> tuple[Real, Real]:
        levels = max(self.grid_level // self.df.base_exponent, 1)
        s, t, _ = mm.diametral_pair(self.df, levels)
        return s, t

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "model": self.df.to_dict()}


class CallableCurve(MetricCurve):
    """Wraps an arbitrary distance function of two parameters."""

    def __init__(self, fn: Callable[[float, float], float]):
        self.fn = fn

    def distance(self, s: Real, t: Real) -> float:
        return float(self.fn(float(s), float(t)))


class Normalized(MetricCurve):
    """A curve rescaled to diameter 1; ``scale`` is the original diameter."""

    def __init__(self, curve: MetricCurve, scale: float | None = None):
        self.curve = curve
        self.scale = float(curve.diameter() if scale is None else scale)
        self.kind = curve.kind
        self.exact_params = curve.exact_params
        self.one_bt = curve.one_bt

    def distance(self, s: Real, t: Real) -> float:
        return self.curve.distance(s, t) / self.scale

    def distances(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        return self.curve.distances(s, t) / self.scale

    def span_diam(self, s: Real, length: Real, tol: float = 1e-9) -> float:
        return self.curve.span_diam(s, length, tol) / self.scale

    def diameter(self) -> float:
        return self.curve.diameter() / self.scale

    def diametral_pair(self) -> tuple[Real, Real]:
        return self.curve.diametral_pair()

    def to_dict(self) -> dict[str, Any]:
        return self.curve.to_dict()


def normalize(curve: MetricCurve) -> Normalized:
    return curve if isinstance(curve, Normalized) else Normalized(curve)


def curve_from_dict(data: dict[str, Any]) -> MetricCurve:
    kind = data.get("kind")
    if kind == "round_circle":
        return RoundCircle()
    if kind == "polyline":
        return Polyline(data["points"])
    if kind == "snowflake_power":
        return SnowflakePower(float(data["epsilon"]))
    if kind == "model_circle":
        return ModelCircle(DiameterFunction.from_dict(data["model"]))
    raise DomainError(f"unknown curve kind {kind!r}")


def load_curve(path: str | Path) -> MetricCurve:
    return curve_from_dict(json.loads(Path(path).read_text()))


# --- arc operations --------------------------------------------------------


def _arc_span(arc: GeneralArc | None) -> tuple[Real, Real]:
    if arc is None:
        return Fraction(0), Fraction(1)
    return arc.start.value, arc.length


def arc_diam(curve: MetricCurve, arc: GeneralArc | None, tol: float = 1e-9) -> float:
    if tol <= 0:
        raise DomainError("tol must be positive")
    s, length = _arc_span(arc)
    return curve.span_diam(s, length, tol)


def diameter_distance(curve: MetricCurve, s: CirclePoint | Real, t: CirclePoint | Real, tol: float = 1e-9) -> float:
    """dia(s, t): the smaller of the two arc diameters between s and t."""
    s = s.value if isinstance(s, CirclePoint) else s
    t = t.value if isinstance(t, CirclePoint) else t
    fwd = (t - s) % 1
    if fwd == 0:
        return 0.0
    return min(curve.span_diam(s, fwd, tol), curve.span_diam(t, 1 - fwd, tol))


def dia(curve: MetricCurve, s: Real, t: Real) -> float:
    """Diameter distance, skipping the arc search on curves known to be 1-bounded turning."""
    return curve.distance(s, t) if curve.one_bt else diameter_distance(curve, s, t)


def bt_constant_estimate(curve: MetricCurve, samples: int, seed: int = 0) -> float:
    """Largest observed dia(s,t)/d(s,t) over random pairs: a lower estimate of the BT constant."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    best = 1.0
    for s, t in rng.random((samples, 2)):
        if s == t:
            continue
        d = curve.distance(s, t)
        best = max(best, diameter_distance(curve, s, t) / d)
    return best


# --- equal-diameter division -----------------------------------------------


@dataclass
class Split:
    points: list[Real]
    diameters: list[float]
    phi: float
    rounds: int = 0

    @property
    def relative_spread(self) -> float:
        return self.phi / max(self.diameters)


def _simplest_dyadic(lo: Fraction, hi: Fraction) -> Fraction:
    """Dyadic rational of least level in [lo, hi]; keeps split points shallow."""
    n = 0
    while True:
        k = -((-lo.numerator << n) // lo.denominator)
        if Fraction(k, 1 << n) <= hi:
            return Fraction(k, 1 << n)
        n += 1


@dataclass
class _Splitter:
    curve: MetricCurve
    start: Real
    length: Real
    exact: bool
    tol: float
    eps: float = 0.0
    evaluations: int = field(default=0)

    def diam(self, u: Real, v: Real) -> float:
        """Regularized diameter of [u, v] in unrolled parameters."""
        if v <= u:
            return 0.0
        self.evaluations += 1
        return self.curve.span_diam(u % 1 if self.exact else float(u) % 1.0, v - u) + self.eps * float(v - u)

    def solve(self, f: Callable[[Real], float], lo: Real, hi: Real) -> Real:
        """Root of the nondecreasing f on [lo, hi] with f(lo) <= 0 <= f(hi)."""
        if self.exact:
            width = hi - lo
            # model diameters are only Hölder in the parameter, so resolve well past tol
            bits = 2 * math.ceil(math.log2(1 / self.tol)) + 8
            while hi - lo > width * Fraction(1, 2**bits):
                mid = (lo + hi) / 2
                val = f(mid)
                if val == 0:
                    return mid
                if val < 0:
                    lo = mid
                else:
                    hi = mid
            return _simplest_dyadic(lo, hi)
        flo, fhi = f(lo), f(hi)
        if flo >= 0:
            return lo
        if fhi <= 0:
            return hi
        lo, hi = float(lo), float(hi)
        try:
            return brentq(f, lo, hi, xtol=1e-15 * max(1.0, abs(hi)), rtol=1e-15, maxiter=200)
        except RuntimeError:
            # plateaus in the diameter can stall brentq; plain bisection always terminates
            for _ in range(200):
                mid = (lo + hi) / 2
                if mid in (lo, hi):
                    break
                if f(mid) < 0:
                    lo = mid
                else:
                    hi = mid
            return (lo + hi) / 2

    def shoot(self, n: int) -> list[Real]:
        """Division points making n - 1 leading pieces equal to the last one."""
        a, b = self.start, self.start + self.length

        def march(delta: float) -> list[Real] | None:
            pts = [a]
            for _ in range(n - 1):
                u = pts[-1]
                if self.diam(u, b) <= delta:
                    return None
                pts.append(self.solve(lambda x: self.diam(u, x) - delta, u, b))
            return pts

        def gap(delta: float) -> float:
            pts = march(delta)
            return -delta if pts is None else self.diam(pts[-1], b) - delta

        top = self.diam(a, b)
        delta = brentq(gap, top * 1e-9, top, xtol=top * 1e-14, rtol=1e-15)
        pts = march(delta)
        if pts is None:
            pts = march(delta * (1 - 1e-12))
        return pts + [b]

    def sweep(self, pts: list[Real]) -> None:
        for i in range(1, len(pts) - 1):
            u, w = pts[i - 1], pts[i + 1]
            pts[i] = self.solve(lambda x: self.diam(u, x) - self.diam(x, w), u, w)


def _diameters(sp: _Splitter, pts: list[Real]) -> list[float]:
    return [sp.curve.span_diam(u % 1 if sp.exact else float(u) % 1.0, v - u) for u, v in zip(pts, pts[1:])]


def equal_diameter_split(
    curve: MetricCurve,
    arc: GeneralArc | None,
    N: int,
    tol: float = 1e-9,
    anchor: Real = 0,
    rounds: int = 5,
    max_sweeps: int = 50,
) -> Split:
    """Divide an arc (or the whole curve, from ``anchor``) into N arcs of equal diameter.

    A shooting pass on the unregularized diameters gives a start; if it does
    not meet ``tol`` the regularized local-equalization rounds take over,
    with ε halving each round and a final ε = 0 round.
    """
    if arc is None:
        start, length = (parse_number(anchor) if isinstance(anchor, str) else anchor), Fraction(1)
    else:
        start, length = arc.start.value, arc.length
    return split_span(curve, start, length, N, tol, rounds, max_sweeps)


def split_span(
    curve: MetricCurve, start: Real, length: Real, N: int, tol: float = 1e-9, rounds: int = 5, max_sweeps: int = 50
) -> Split:
    """:func:`equal_diameter_split` for the arc from ``start`` of parameter length ``length``."""
    if N < 2:
        raise DomainError("N must be at least 2")
    exact = curve.exact_params and isinstance(start, Fraction) and isinstance(length, Fraction)
    if not exact:
        start, length = float(start), float(length)
    sp = _Splitter(curve, start, length, exact, tol)

    def finish(pts: list[Real], k: int) -> Split:
        diams = _diameters(sp, pts)
        phi = max(diams) - min(diams)
        return Split([p % 1 if exact else float(p) % 1.0 for p in pts[1:-1]], diams, phi, k)

    if N == 2:
        pts = [start, start + length / 2, start + length]
        sp.sweep(pts)
    else:
        pts = sp.shoot(N)
    best = finish(pts, 0)
    if best.relative_spread <= tol:
        return best
    scale = max(best.diameters)
    for k in range(1, rounds + 2):
        sp.eps = scale * 2.0**-k if k <= rounds else 0.0
        for _ in range(max_sweeps):
            sp.sweep(pts)
            d = [sp.diam(u, v) for u, v in zip(pts, pts[1:])]
            if max(d) - min(d) <= tol * max(d) / 4:
                break
        trial = finish(pts, k)
        if trial.phi < best.phi:
            best = trial
        if trial.relative_spread <= tol:
            return trial
    raise SplitError(f"equal-diameter split did not reach tol {tol}; best spread {best.relative_spread:.3g}", best.phi)


# --- subdivision trees -----------------------------------------------------


@dataclass
class SubdivisionTree:
    """Nested divisions of the curve: generation n has base**n arcs.

    ``points[n][k]`` is the start parameter of arc k of generation n and
    ``diameters[n][k]`` its diameter; generation 0 is the whole curve.
    """

    base: int
    points: list[list[Real]]
    diameters: list[list[float]]

    @property
    def depth(self) -> int:
        return len(self.points) - 1

    @property
    def anchor(self) -> Real:
        return self.points[0][0]

    def arc(self, n: int, k: int) -> tuple[Real, Real]:
        """Start and unrolled end parameter of arc k of generation n."""
        row = self.points[n]
        s = row[k]
        e = row[(k + 1) % len(row)]
        while e <= s:
            e += 1
        if n == 0:
            e = s + 1
        return s, e

    def parent(self, n: int, k: int) -> int:
        return k // self.base

    def max_diameters(self) -> list[float]:
        return [max(row) for row in self.diameters]

    def to_dict(self) -> dict[str, Any]:
        return {
            "base": self.base,
            "points": [[format_number(p) for p in row] for row in self.points],
            "diameters": self.diameters,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SubdivisionTree:
        pts = [[parse_number(p) if isinstance(p, str) else float(p) for p in row] for row in data["points"]]
        return cls(int(data["base"]), pts, [list(map(float, row)) for row in data["diameters"]])
