"""Planar snowflake polygons driven by a 4-adic diameter function.

Edges are stored as consecutive vertices of a counterclockwise polygon, so
the exterior of every edge lies on its right. A SNOW edge is replaced by the
similarity copy of the bump template with its tip on that side; a HALF edge
is cut into four collinear pieces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Union

import numpy as np
from scipy.spatial.distance import directed_hausdorff

from .curves import _point_set_diameter
from .diameter import ChoiceSource, DiameterFunction
from .errors import DomainError, ParameterMismatchError
from .model_metric import FLOAT_BUDGET, grid_distance_matrix

Real = Union[Fraction, float]
GEOM_TOL = 1e-12
SQUARE = np.array([0, 1, 1 + 1j, 1j], dtype=complex)


@dataclass(frozen=True)
class GeneratorArc:
    """The bump arc on the unit base edge from 0 to 1."""

    p: float
    tip_angle: float
    height: float
    vertices: tuple[complex, ...]

    @property
    def segments(self) -> list[tuple[complex, complex]]:
        v = self.vertices
        return list(zip(v, v[1:]))


def separation_constant(p: Real) -> float:
    return 0.5 - float(p)


def bt_constant(p: Real) -> float:
    """The bounded-turning bound 16/(1 - 2p) for the snowflake polygons."""
    return 16.0 / (1.0 - 2.0 * float(p))


def _check_p(p: Real) -> float:
    pf = float(p)
    if not 0.25 <= pf < 0.5:
        raise DomainError(f"snowflake parameter {p} outside [1/4, 1/2)")
    return pf


def generator_arc(p: Real) -> GeneratorArc:
    pf = _check_p(p)
    theta = 2 * math.asin(1 / (2 * pf) - 1)
    h = math.sqrt(pf - 0.25)
    verts = (0j, complex(pf, 0), complex(0.5, -h), complex(1 - pf, 0), 1 + 0j)
    return GeneratorArc(pf, theta, h, verts)


@dataclass(frozen=True)
class SnowPolygon:
    """Level-n polygon: 4^n edges, vertex k is the start of edge k."""

    level: int
    vertices: np.ndarray
    deltas: np.ndarray

    @property
    def ends(self) -> np.ndarray:
        return np.roll(self.vertices, -1)

    @property
    def lengths(self) -> np.ndarray:
        return np.abs(self.ends - self.vertices)

    @property
    def edges(self) -> list[dict[str, Any]]:
        return [
            {"start": [a.real, a.imag], "end": [b.real, b.imag], "exterior_side": "right", "diameter": float(d)}
            for a, b, d in zip(self.vertices, self.ends, self.deltas)
        ]

    def to_dict(self) -> dict[str, Any]:
        return {"level": self.level, "vertices": [[float(z.real), float(z.imag)] for z in self.vertices]}

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    def envelopes(self, p: Real) -> np.ndarray:
        """Triangles T(E) as rows (start, end, tip)."""
        h = math.sqrt(float(p) - 0.25)
        a, b = self.vertices, self.ends
        tip = (a + b) / 2 + (b - a) * (-1j) * h
        return np.stack([a, b, tip], axis=1)


def _as_model(p: Real, choices: DiameterFunction | ChoiceSource) -> DiameterFunction:
    if isinstance(choices, ChoiceSource):
        return DiameterFunction(p, choices, 2)
    if choices.base_exponent != 2:
        raise ParameterMismatchError(f"need a 4-adic diameter function, got base 2^{choices.base_exponent}")
    if abs(float(choices.parameter) - float(p)) > GEOM_TOL:
        raise ParameterMismatchError(f"choices carry parameter {choices.parameter}, snowflake uses {p}")
    return choices


def generate(p: Real, choices: DiameterFunction | ChoiceSource, levels: int) -> list[SnowPolygon]:
    """Polygons R^1 .. R^levels, with edge k of R^n sized as the rescaled Δ(J^n_k)."""
    if levels < 1:
        raise DomainError("levels must be >= 1")
    gen = generator_arc(p)
    df = _as_model(p, choices)
    scale = 1.0 / float(df.value_at(1, 0))
    snow = np.array(gen.vertices[:4])
    half = np.array([0, 0.25, 0.5, 0.75], dtype=complex)
    verts = SQUARE.copy()
    out = [SnowPolygon(1, verts, df.level_values(1) * scale)]
    for n in range(1, levels):
        a = verts
        d = np.roll(verts, -1) - verts
        bits = df.choices.bits(n, np.arange(verts.size), 2).astype(bool)
        template = np.where(bits[:, None], snow[None, :], half[None, :])
        verts = (a[:, None] + d[:, None] * template).reshape(-1)
        out.append(SnowPolygon(n + 1, verts, df.level_values(n + 1) * scale))
    return out


def check_diameters(poly: SnowPolygon) -> float:
    """Largest relative gap between an edge length and its Δ value."""
    return float(np.max(np.abs(poly.lengths - poly.deltas) / poly.deltas))


# --- envelopes --------------------------------------------------------------


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u.real * v.imag - u.imag * v.real


def _point_segment(z: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    dd = np.abs(d) ** 2
    t = np.where(dd > 0, ((z - a) * d.conj()).real / np.where(dd > 0, dd, 1), 0.0)
    return np.abs(z - (a + np.clip(t, 0, 1) * d))


def _point_triangle(z: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Distance from points to filled triangles (0 inside), rowwise."""
    p0, p1, p2 = tri[..., 0], tri[..., 1], tri[..., 2]
    c = np.stack([_cross(p1 - p0, z - p0), _cross(p2 - p1, z - p1), _cross(p0 - p2, z - p2)])
    inside = np.all(c <= 0, axis=0) | np.all(c >= 0, axis=0)
    side = np.minimum.reduce([_point_segment(z, p0, p1), _point_segment(z, p1, p2), _point_segment(z, p2, p0)])
    return np.where(inside, 0.0, side)


def _segments_cross(a: complex, b: complex, c: complex, d: complex) -> bool:
    d1, d2 = _cross(np.array(b - a), np.array(c - a)), _cross(np.array(b - a), np.array(d - a))
    d3, d4 = _cross(np.array(d - c), np.array(a - c)), _cross(np.array(d - c), np.array(b - c))
    return bool(d1 * d2 < 0 and d3 * d4 < 0)


def triangle_distance(s: np.ndarray, t: np.ndarray) -> float:
    """Euclidean distance between two filled triangles given as 3 complex vertices."""
    for i in range(3):
        for j in range(3):
            if _segments_cross(s[i], s[(i + 1) % 3], t[j], t[(j + 1) % 3]):
                return 0.0
    best = float(np.min(_point_triangle(s, np.broadcast_to(t, (3, 3)))))
    return min(best, float(np.min(_point_triangle(t, np.broadcast_to(s, (3, 3))))))


@dataclass
class EnvelopeReport:
    level: int
    c_p: float
    max_nesting_gap: float
    nested: bool
    min_separation_ratio: float
    separated: bool

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def triangles(poly: SnowPolygon, p: Real, child: SnowPolygon) -> EnvelopeReport:
    """Check nesting of the children's envelopes in the parents' and the 0-2, 1-3 separation."""
    if child.vertices.size != 4 * poly.vertices.size:
        raise DomainError("child polygon must be the next level")
    parents = poly.envelopes(p)
    kids = child.envelopes(p).reshape(-1, 4, 3)
    diam = poly.lengths
    gap = 0.0
    for j in range(4):
        for v in range(3):
            gap = max(gap, float(np.max(_point_triangle(kids[:, j, v], parents) / diam)))
    ratio = math.inf
    for k in range(parents.shape[0]):
        for i, j in ((0, 2), (1, 3)):
            ratio = min(ratio, triangle_distance(kids[k, i], kids[k, j]) / diam[k])
    c = separation_constant(p)
    return EnvelopeReport(poly.level, c, gap, gap <= GEOM_TOL, ratio, ratio >= c - GEOM_TOL)


# --- the correspondence with the circle ------------------------------------


def phi_endpoints(poly: SnowPolygon) -> dict[Fraction, complex]:
    """Generation-n 4-adic endpoints k/4^n mapped to the start vertex of edge k."""
    n = poly.vertices.size
    return {Fraction(k, n): complex(z) for k, z in enumerate(poly.vertices)}


@dataclass
class PhiReport:
    level: int
    pairs: int
    violations: int
    min_ratio: float
    max_ratio: float
    lower_bound: float
    upper_bound: float

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def phi_bracket(p: Real, df: DiameterFunction, poly: SnowPolygon) -> PhiReport:
    """Compare |φ(s) - φ(t)| with the rescaled model distance on all endpoint pairs of one level."""
    df = _as_model(p, df)
    n = poly.level
    dist = grid_distance_matrix(df, n) / float(df.value_at(1, 0))
    z = poly.vertices
    euclid = np.abs(z[:, None] - z[None, :])
    iu = np.triu_indices(z.size, 1)
    d, e = dist[iu], euclid[iu]
    lo_c, hi_c = separation_constant(p) / 8, 8.0
    # a pair fails only when even the widened model bracket cannot accommodate it
    d_lo, d_hi = d * (1 - FLOAT_BUDGET), d * (1 + FLOAT_BUDGET)
    bad = (e < lo_c * d_lo - GEOM_TOL) | (e > hi_c * d_hi + GEOM_TOL)
    ratio = e / d
    return PhiReport(n, int(d.size), int(bad.sum()), float(ratio.min()), float(ratio.max()), lo_c, hi_c)


def bt_ratios(poly: SnowPolygon, samples: int = 500, seed: int = 0) -> float:
    """Largest sampled min(diam of the two vertex arcs) / |v_i - v_j|."""
    rng = np.random.default_rng(seed)
    z = poly.vertices
    pts = np.column_stack([z.real, z.imag])
    n = z.size
    worst = 0.0
    for _ in range(samples):
        i, j = sorted(rng.choice(n, 2, replace=False))
        inner = _point_set_diameter(pts[i : j + 1])
        outer = _point_set_diameter(np.vstack([pts[j:], pts[: i + 1]]))
        worst = max(worst, min(inner, outer) / abs(z[i] - z[j]))
    return worst


# --- stage convergence -----------------------------------------------------


@dataclass
class HausdorffReport:
    level: int
    certified: float
    sampled: float
    max_delta: float

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _densify(poly: SnowPolygon, per_edge: int) -> np.ndarray:
    t = np.arange(per_edge) / per_edge
    z = (poly.vertices[:, None] + (poly.ends - poly.vertices)[:, None] * t[None, :]).reshape(-1)
    return np.column_stack([z.real, z.imag])


def hausdorff(poly: SnowPolygon, child: SnowPolygon, per_edge: int = 8) -> HausdorffReport:
    """Hausdorff distance between successive stages.

    The certified value bounds each edge against its own replacement: the
    replacement runs between the edge's endpoints, so its largest vertex
    offset from the edge bounds both directed distances.
    """
    a, b = poly.vertices, poly.ends
    kids = child.vertices.reshape(-1, 4)
    offsets = np.stack([_point_segment(kids[:, j], a, b) for j in range(4)])
    certified = float(offsets.max())
    u, v = _densify(poly, per_edge), _densify(child, per_edge)
    sampled = max(directed_hausdorff(u, v)[0], directed_hausdorff(v, u)[0])
    return HausdorffReport(poly.level, certified, float(sampled), float(poly.deltas.max()))


# --- output -----------------------------------------------------------------


def _fmt(x: float) -> str:
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def export_svg(polygons: list[SnowPolygon], overlay: bool = False, p: Real | None = None, size: int = 512) -> str:
    """SVG with one closed path per polygon and optional envelope triangles."""
    if not polygons:
        raise DomainError("nothing to draw")
    if overlay and p is None:
        raise DomainError("triangle overlays need the snowflake parameter")
    allz = np.concatenate([q.vertices for q in polygons])
    if overlay:
        allz = np.concatenate([allz] + [q.envelopes(p).reshape(-1) for q in polygons])
    x0, x1, y0, y1 = allz.real.min(), allz.real.max(), allz.imag.min(), allz.imag.max()
    pad = 0.02 * max(x1 - x0, y1 - y0)
    w, h = x1 - x0 + 2 * pad, y1 - y0 + 2 * pad
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="{_fmt(x0 - pad)} {_fmt(-(y1 + pad))} {_fmt(w)} {_fmt(h)}">'
    ]
    stroke = _fmt(w / size)
    for q in polygons:
        pts = " L ".join(f"{_fmt(z.real)} {_fmt(-z.imag)}" for z in q.vertices)
        lines.append(f'<path data-level="{q.level}" d="M {pts} Z" fill="none" stroke="black" stroke-width="{stroke}"/>')
        if overlay:
            for tri in q.envelopes(p):
                pts = " ".join(f"{_fmt(z.real)},{_fmt(-z.imag)}" for z in tri)
                lines.append(f'<polygon points="{pts}" fill="none" stroke="red" stroke-width="{stroke}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
