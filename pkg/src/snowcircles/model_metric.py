"""The chain metric d_Δ: certified brackets, arc diameters and a brute-force oracle.

A chain joining x and y covers one of the two complementary arcs, and a
cover of an arc is a chain between its endpoints.  So d(x, y) is the smaller
of the two minimal cover costs.  The minimal cover of an arc only ever
refines the arcs along the two boundary paths of the grid tree, which gives
an O(depth) recursion (``_suffix`` / ``_prefix`` below).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Union

import numpy as np

from .diameter import DiameterFunction
from .dyadic import CirclePoint, DyadicArc, GeneralArc, dyadic_level, grid_cover
from .errors import DomainError, ResourceError

Real = Union[Fraction, float]
FLOAT_BUDGET = 1e-12
MAX_ORACLE_NODES = 2**11


@dataclass(frozen=True)
class MetricBracket:
    lower: Real
    upper: Real
    depth: int
    certified: bool = True

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError(f"empty bracket [{self.lower}, {self.upper}]")

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    @property
    def mid(self) -> float:
        return (float(self.lower) + float(self.upper)) / 2

    @property
    def width(self) -> float:
        return float(self.upper) - float(self.lower)

    def to_dict(self) -> dict[str, Any]:
        return {"lower": float(self.lower), "upper": float(self.upper), "depth": self.depth, "certified": self.certified}


@dataclass(frozen=True)
class ArcBracket:
    inner_left: DyadicArc
    inner_right: DyadicArc
    outer_left: DyadicArc
    outer_right: DyadicArc
    delta_star: Real

    def to_dict(self) -> dict[str, Any]:
        return {
            "I": str(self.inner_left),
            "J": str(self.inner_right),
            "I_hat": str(self.outer_left),
            "J_hat": str(self.outer_right),
            "delta_star": float(self.delta_star),
        }


def _point(x: CirclePoint | Real | str) -> CirclePoint:
    return x if isinstance(x, CirclePoint) else CirclePoint.parse(x)


def _floor_scaled(x: Real, scale: int) -> int:
    if isinstance(x, Fraction):
        return (x.numerator * scale) // x.denominator
    return math.floor(x * scale)


def _ceil_scaled(x: Real, scale: int) -> int:
    return -_floor_scaled(-x, scale)


def _scaled_parts(x: Real, m: int, levels: int) -> tuple[list[int], list[bool]]:
    """floor(x * 2^(m l)) for l = 0..levels and whether x lies on each grid."""
    f = x if isinstance(x, Fraction) else Fraction(x)
    q, r = divmod(f.numerator << (m * levels), f.denominator)
    floors, exact = [], []
    for l in range(levels + 1):
        k = m * (levels - l)
        floors.append(q >> k)
        exact.append(r == 0 and not q & ((1 << k) - 1))
    return floors, exact


def _suffix(df: DiameterFunction, x: Real, levels: int) -> tuple[list[int], list[Real]]:
    """Indices of the right-containing arcs of x and cover costs of [x, arc end]."""
    base = df.base
    idx, on_grid = _scaled_parts(x, df.base_exponent, levels)
    vals = [df.value_at(l, idx[l]) for l in range(levels + 1)]
    suf: list[Real] = [0] * (levels + 1)
    suf[levels] = vals[levels]
    for l in range(levels - 1, -1, -1):
        if on_grid[l]:
            suf[l] = vals[l]
        else:
            c = idx[l + 1] - idx[l] * base
            suf[l] = min(vals[l], suf[l + 1] + (base - 1 - c) * vals[l + 1])
    return idx, suf


def _prefix(df: DiameterFunction, y: Real, levels: int) -> tuple[list[int], list[Real]]:
    """Indices of the left-containing arcs of y in (0,1] and cover costs of [arc start, y]."""
    base = df.base
    floors, on_grid = _scaled_parts(y, df.base_exponent, levels)
    idx = [f - 1 if g else f for f, g in zip(floors, on_grid)]
    vals = [df.value_at(l, idx[l]) for l in range(levels + 1)]
    pre: list[Real] = [0] * (levels + 1)
    pre[levels] = vals[levels]
    for l in range(levels - 1, -1, -1):
        if on_grid[l]:
            pre[l] = vals[l]
        else:
            c = idx[l + 1] - idx[l] * base
            pre[l] = min(vals[l], pre[l + 1] + c * vals[l + 1])
    return idx, pre


def _cover(df: DiameterFunction, a: Real, b: Real, levels: int) -> Real:
    """Least cost of covering [a, b] (unrolled, a < b <= a + 1) by grid arcs of level <= levels."""
    one = Fraction(1) if df.exact else 1.0
    if b - a >= 1 or levels == 0:
        return one
    base = df.base
    if b <= 1:
        ia, suf = _suffix(df, a, levels)
        ib, pre = _prefix(df, b, levels)
        top = max(l for l in range(levels + 1) if ia[l] == ib[l])
        if top == levels:
            return df.value_at(levels, ia[levels])
        i = ia[top + 1] - ia[top] * base
        j = ib[top + 1] - ib[top] * base
        child = df.value_at(top + 1, ia[top + 1])
        return min(df.value_at(top, ia[top]), suf[top + 1] + (j - i - 1) * child + pre[top + 1])
    b -= 1
    ia, suf = _suffix(df, a, levels)
    ib, pre = _prefix(df, b, levels)
    child = df.value_at(1, 0)
    i, j = ia[1], ib[1]
    return min(one, suf[1] + (base - 1 - i) * child + j * child + pre[1])


def _unroll(a: Real, b: Real) -> Real:
    return b if b > a else b + 1


def cover_cost(df: DiameterFunction, arc: GeneralArc, depth: int) -> Real:
    """Cost of the cheapest cover of ``arc`` by grid arcs of dyadic generation <= depth.

    An upper bound for the untruncated cost; equal to it when both
    endpoints lie on the grid at that depth.
    """
    a = arc.start.value
    return _cover(df, a, _unroll(a, arc.end.value), depth // df.base_exponent)


def _grid_level(df: DiameterFunction, x: Real) -> int | None:
    lvl = dyadic_level(x) if isinstance(x, Fraction) else None
    return None if lvl is None else -(-lvl // df.base_exponent)


def _widen(df: DiameterFunction, lo: Real, hi: Real, mixed: bool) -> tuple[Real, Real]:
    if df.exact and not mixed:
        return lo, hi
    return float(lo) * (1 - FLOAT_BUDGET), float(hi) * (1 + FLOAT_BUDGET)


def _inner_lower(df: DiameterFunction, a: Real, b: Real, levels: int) -> Real:
    """Certified lower bound on the untruncated cover cost of [a, b] (unrolled)."""
    scale = df.base**levels
    lo, hi = _ceil_scaled(a, scale), _floor_scaled(b, scale)
    best: Real = b - a  # every arc of the grid is at least as heavy as it is long
    if lo < hi:
        best = max(best, _cover(df, Fraction(lo, scale), Fraction(hi, scale), levels))
    return best


def distance(df: DiameterFunction, x: CirclePoint | Real | str, y: CirclePoint | Real | str, depth: int) -> MetricBracket:
    """Certified bracket for d(x, y) using grid arcs down to dyadic generation ``depth``."""
    x, y = _point(x), _point(y)
    a, b = x.value, y.value
    if a == b:
        return MetricBracket(0, 0, depth)
    levels = depth // df.base_exponent
    upper = min(_cover(df, a, _unroll(a, b), levels), _cover(df, b, _unroll(b, a), levels))
    ga, gb = _grid_level(df, a), _grid_level(df, b)
    mixed = not (x.exact and y.exact)
    if ga is not None and gb is not None and max(ga, gb) <= levels:
        lower = upper
    else:
        lower = min(_inner_lower(df, a, _unroll(a, b), levels), _inner_lower(df, b, _unroll(b, a), levels))
        lower = min(lower, upper)
    lower, upper = _widen(df, lower, upper, mixed)
    return MetricBracket(lower, upper, depth)


# --- the exhaustive oracle -------------------------------------------------


@lru_cache(maxsize=16)
def _intersection_graph(base_exponent: int, levels: int) -> tuple[list[tuple[int, int]], list[list[int]], int]:
    base = 2**base_exponent
    total = base**levels
    nodes = [(l, k) for l in range(levels + 1) for k in range(base**l)]
    if len(nodes) > MAX_ORACLE_NODES:
        raise ResourceError(f"oracle graph with {len(nodes)} arcs exceeds the limit {MAX_ORACLE_NODES}")
    s = np.array([k * base ** (levels - l) for l, k in nodes])
    e = s + np.array([base ** (levels - l) for l, _ in nodes])
    adj = []
    for u in range(len(nodes)):
        hit = (np.maximum(s, s[u]) <= np.minimum(e, e[u])) | ((e[u] == total) & (s == 0)) | ((e == total) & (s[u] == 0))
        hit[u] = False
        adj.append(np.flatnonzero(hit).tolist())
    return nodes, adj, total


def brute_force_distance(df: DiameterFunction, x: CirclePoint | Real | str, y: CirclePoint | Real | str, depth: int) -> Real:
    """Exact chain infimum over grid arcs of generation <= depth, by node-weighted Dijkstra."""
    x, y = _point(x), _point(y)
    levels = depth // df.base_exponent
    for p in (x, y):
        g = _grid_level(df, p.value) if p.exact else None
        if g is None or g > levels:
            raise DomainError(f"oracle points must be grid endpoints of generation <= {depth}, got {p}")
    if x.value == y.value:
        return 0
    nodes, adj, total = _intersection_graph(df.base_exponent, levels)
    base = df.base

    def holds(node: tuple[int, int], pos: int) -> bool:
        l, k = node
        s = k * base ** (levels - l)
        e = s + base ** (levels - l)
        return s <= pos <= e or (pos == 0 and e == total)

    px, py = int(x.value * total), int(y.value * total)
    weight = [df.value_at(l, k) for l, k in nodes]
    best: dict[int, Real] = {}
    heap: list[tuple[Real, int]] = []
    for u, node in enumerate(nodes):
        if holds(node, px):
            best[u] = weight[u]
            heapq.heappush(heap, (weight[u], u))
    while heap:
        cost, u = heapq.heappop(heap)
        if cost > best[u]:
            continue
        if holds(nodes[u], py):
            return cost
        for v in adj[u]:
            c = cost + weight[v]
            if v not in best or c < best[v]:
                best[v] = c
                heapq.heappush(heap, (c, v))
    raise AssertionError("the whole circle always joins two points")


# --- arcs ------------------------------------------------------------------


def _default_levels(df: DiameterFunction, arc: GeneralArc, cap: int = 64) -> int:
    lv = [dyadic_level(Fraction(p.value)) for p in (arc.start, arc.end)]
    deepest = max(cap if v is None else min(v, cap) for v in lv)
    return -(-deepest // df.base_exponent)


def _grid_arc(df: DiameterFunction, arc: GeneralArc) -> DyadicArc | None:
    length = arc.length
    if not (arc.start.exact and isinstance(length, Fraction)) or length.numerator != 1:
        return None
    gen = dyadic_level(length)
    if gen is None or gen % df.base_exponent:
        return None
    k = arc.start.value * 2**gen
    return DyadicArc(gen, int(k)) if k.denominator == 1 else None


def bracket_arcs(df: DiameterFunction, arc: GeneralArc, max_generation: int | None = None) -> ArcBracket:
    """The I, J, Î, Ĵ decomposition of an arc: I ∪ J ⊂ A ⊂ Î ∪ Ĵ with Δ(I) maximal."""
    m = df.base_exponent
    levels = _default_levels(df, arc) if max_generation is None else max_generation // m
    a = Fraction(arc.start.value)
    b = a + Fraction(arc.length)
    scale = df.base**levels
    lo, hi = _ceil_scaled(a, scale), _floor_scaled(b, scale)
    if lo >= hi:
        raise DomainError(f"arc contains no grid arc above generation {levels * m}")
    exact = GeneralArc(CirclePoint(a), CirclePoint(b))
    cover = grid_cover(Fraction(lo, scale), Fraction(hi - lo, scale), m, levels)

    def key(I: DyadicArc) -> tuple:
        return (-df.value(I), I.generation, exact.offset(I.start))

    I = min(cover, key=key)
    I_hat = I.parent(m)
    length = b - a
    if I_hat.generation == 0 or (a - I_hat.start) % 1 + length <= I_hat.length:
        return ArcBracket(I, I, I_hat, I_hat, df.value(I))
    u = I_hat.start
    if (u - a) % 1 > length:
        # Î sticks out on the left: J starts at the right end of Î
        y = I_hat.end % 1
        room = length - (y - a) % 1
        g = _largest_fit(df, y, room)
        J = DyadicArc(g * m, int(y * df.base**g) % df.base**g)
    else:
        y = u
        g = _largest_fit(df, y, (y - a) % 1)
        J = DyadicArc(g * m, (int(y * df.base**g) - 1) % df.base**g)
    return ArcBracket(I, J, I_hat, J.parent(m), df.value(I))


def _largest_fit(df: DiameterFunction, y: Fraction, room: Fraction) -> int:
    """Least grid level whose arcs have y as an endpoint and fit into ``room``.

    y is a grid point and room is positive, so the search ends; it may go far
    below the bracket's own level when A nearly fills Î.
    """
    if room <= 0:
        raise DomainError("no grid arc fits next to the bracket arc")
    bits = room.denominator.bit_length() - room.numerator.bit_length()
    g = max(bits // df.base_exponent - 1, 1)
    while (y * df.base**g).denominator != 1 or Fraction(1, df.base**g) > room:
        g += 1
    return g


def _pair_distance_exact(df: DiameterFunction, p: Fraction, q: Fraction, levels: int) -> Real:
    return min(_cover(df, p, _unroll(p, q), levels), _cover(df, q, _unroll(q, p), levels))


def _sampled_sup(df: DiameterFunction, a: Fraction, length: Fraction, levels: int, samples: int) -> Real:
    """Max of d over grid points of [a, a+length]; exact distances, unimodal search per point."""
    base = df.base
    step_level = 0
    while step_level < levels and length * base**step_level < samples:
        step_level += 1
    scale = base**step_level
    # covers between points of this grid are exact without going deeper
    levels = max(min(levels, step_level), 1)
    lo, hi = _ceil_scaled(a, scale), _floor_scaled(a + length, scale)
    pts = [Fraction(k, scale) % 1 for k in range(lo, hi + 1)]
    best: Real = 0
    for i, p in enumerate(pts):
        left, right = i + 1, len(pts) - 1
        if left > right:
            break
        # cc(p -> q) grows and cc(q -> p) shrinks as q moves forward
        while left < right:
            mid = (left + right) // 2
            q = pts[mid]
            if _cover(df, p, _unroll(p, q), levels) >= _cover(df, q, _unroll(q, p), levels):
                right = mid
            else:
                left = mid + 1
        for j in (left - 1, left):
            if i < j < len(pts):
                best = max(best, _pair_distance_exact(df, p, pts[j], levels))
    return best


def arc_diameter(df: DiameterFunction, arc: GeneralArc | DyadicArc | None, depth: int, samples: int = 16) -> MetricBracket:
    """Certified bracket for diam_d of an arc; ``None`` stands for the whole circle."""
    m = df.base_exponent
    levels = max(depth // m, 1)
    if arc is None:
        return circle_diameter(df, depth)
    if isinstance(arc, DyadicArc):
        if arc.generation == 0:
            return circle_diameter(df, depth)
        v = df.value(arc)
        return MetricBracket(v, v, depth)
    grid = _grid_arc(df, arc)
    if grid is not None:
        v = df.value(grid)
        return MetricBracket(v, v, depth)
    a, e = arc.start.value, arc.end.value
    ga, gb = _grid_level(df, a), _grid_level(df, e)
    if ga is not None and gb is not None and max(ga, gb) <= levels:
        # an arc no costlier to cover than its complement has diameter equal to that cost
        inside = _cover(df, a, _unroll(a, e), levels)
        if inside <= _cover(df, e, _unroll(e, a), levels):
            return MetricBracket(inside, inside, depth)
    mixed = not (arc.start.exact and arc.end.exact)
    ab = bracket_arcs(df, arc)
    star = ab.delta_star
    cap: Real = 2 ** (m + 1) * star
    upper: Real = cap
    hats = df.value(ab.outer_left) if ab.inner_left == ab.inner_right else df.value(ab.outer_left) + df.value(ab.outer_right)
    a = arc.start.value
    b = _unroll(a, arc.end.value)
    upper = min(upper, hats, _cover(df, a, b, levels))
    lower: Real = max(star, distance(df, arc.start, arc.end, depth).lower)
    if lower < upper and samples:
        lower = max(lower, _sampled_sup(df, Fraction(a), Fraction(b - a), levels, samples))
    lower = min(lower, upper)
    lower, upper = _widen(df, lower, upper, mixed)
    if df.exact:
        # the arc-bracket bounds hold exactly for the arc as given
        lower, upper = max(lower, star), min(upper, cap)
    return MetricBracket(lower, upper, depth)


def circle_diameter(df: DiameterFunction, depth: int) -> MetricBracket:
    """Bracket for diam_d of the whole circle: exact sup over grid points plus two level widths."""
    levels = max(depth // df.base_exponent, 1)
    dist = grid_distance_matrix(df, levels)
    lower = float(dist.max())
    upper = min(1.0, lower + 2 * float(df.level_values(levels).max()))
    return MetricBracket(lower * (1 - FLOAT_BUDGET), upper * (1 + FLOAT_BUDGET), depth)


def diametral_pair(df: DiameterFunction, levels: int) -> tuple[Fraction, Fraction, float]:
    """Grid points realizing the largest grid distance; prefers the pair starting at 0."""
    dist = grid_distance_matrix(df, levels)
    top = dist.max()
    n = dist.shape[0]
    hits = np.argwhere(dist >= top * (1 - 1e-12))
    i, j = min(map(tuple, hits))
    return Fraction(int(i), n), Fraction(int(j), n), float(top)


# --- vectorized grid distances --------------------------------------------


def _boundary_tables(df: DiameterFunction, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Suffix costs for x_i = i/N (i < N) and prefix costs for y_j = j/N (1 <= j <= N)."""
    m, base = df.base_exponent, df.base
    n = base**levels
    i = np.arange(n)
    j = np.arange(1, n + 1)
    suf = np.empty((n, levels + 1))
    pre = np.empty((n, levels + 1))
    suf[:, levels] = df.level_values(levels)[i]
    pre[:, levels] = df.level_values(levels)[j - 1]
    for l in range(levels - 1, -1, -1):
        sh = m * (levels - l)
        vals, kids = df.level_values(l), df.level_values(l + 1)
        ri, li = i >> sh, (j - 1) >> sh
        c = (i >> (sh - m)) & (base - 1)
        joined = np.minimum(vals[ri], suf[:, l + 1] + (base - 1 - c) * kids[i >> (sh - m)])
        suf[:, l] = np.where(i % base ** (levels - l) == 0, vals[ri], joined)
        c = ((j - 1) >> (sh - m)) & (base - 1)
        joined = np.minimum(vals[li], pre[:, l + 1] + c * kids[(j - 1) >> (sh - m)])
        pre[:, l] = np.where(j % base ** (levels - l) == 0, vals[li], joined)
    return suf, pre


def grid_distance_rows(df: DiameterFunction, levels: int, rows: np.ndarray | None = None) -> np.ndarray:
    """d(i/N, j/N) for the grid of level ``levels`` (N = base^levels), in floating point.

    Returns the matrix restricted to the requested rows.
    """
    key = ("tables", levels)
    tables = df._cache.get(key)
    if tables is None:
        tables = _boundary_tables(df, levels)
        df._cache[key] = tables
    suf, pre = tables
    m, base = df.base_exponent, df.base
    n = base**levels
    rows = np.arange(n) if rows is None else np.asarray(rows)
    I = rows[:, None]
    J = np.arange(n)[None, :]
    lo, hi = np.minimum(I, J), np.maximum(I, J)

    def forward(s: np.ndarray, e: np.ndarray) -> np.ndarray:
        # cover of [s/N, e/N] with s < e <= N
        x = s ^ (e - 1)
        bits = np.frexp(x.astype(float))[1]
        top = levels - (-(-bits // m))
        deep = np.minimum(top + 1, levels)
        sh = m * (levels - deep)
        ci = (s >> sh) & (base - 1)
        cj = ((e - 1) >> sh) & (base - 1)
        out = np.empty(s.shape)
        same = top == levels
        vals_top = np.empty(s.shape)
        child = np.empty(s.shape)
        for l in np.unique(top):
            sel = top == l
            vals_top[sel] = df.level_values(l)[s[sel] >> (m * (levels - l))]
            if l < levels:
                child[sel] = df.level_values(l + 1)[s[sel] >> (m * (levels - l - 1))]
        sufv = suf[s, deep]
        prev = pre[np.minimum(e, n) - 1, deep]
        out = np.minimum(vals_top, sufv + (cj - ci - 1) * child + prev)
        return np.where(same, vals_top, out)

    lo_b, hi_b = np.broadcast_arrays(lo, hi)
    diff = lo_b != hi_b
    res = np.zeros(lo_b.shape)
    s, e = lo_b[diff], hi_b[diff]
    inner = forward(s, e)
    # the other arc: [e/N, 1] plus [0, s/N]
    k1 = df.level_values(1)[0]
    wrap = np.empty(s.shape)
    zero = s == 0
    if zero.any():
        wrap[zero] = forward(e[zero], np.full(int(zero.sum()), n))
    nz = ~zero
    if nz.any():
        ss, ee = s[nz], e[nz]
        sh = m * (levels - 1)
        i1 = ee >> sh
        j1 = (ss - 1) >> sh
        wrap[nz] = np.minimum(1.0, suf[ee, 1] + (base - 1 - i1) * k1 + j1 * k1 + pre[ss - 1, 1])
    res[diff] = np.minimum(inner, wrap)
    return res


def grid_distance_matrix(df: DiameterFunction, levels: int) -> np.ndarray:
    key = ("matrix", levels)
    hit = df._cache.get(key)
    if hit is None:
        hit = grid_distance_rows(df, levels)
        hit.setflags(write=False)
        df._cache[key] = hit
    return hit
