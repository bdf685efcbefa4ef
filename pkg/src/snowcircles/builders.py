"""Build a diameter function and a matching subdivision of a curve.

Generation n of the subdivision tree corresponds to grid level n of the
built model: arc k of the tree is the image of grid arc k.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Union

import numpy as np

from .curves import MetricCurve, Normalized, SubdivisionTree, curve_from_dict, normalize, split_span
from .diameter import ChoiceSource, DiameterFunction, exact_root, extend_to_dyadic, snow_runs
from .dyadic import CirclePoint, format_number, parse_number
from .errors import BuildError, DomainError, InsufficientDepthError, ResourceError

Real = Union[Fraction, float]
SANDWICH_SLACK = 1e-9
MAX_TREE_ARCS = 2**20


@dataclass
class BuildResult:
    kind: str
    model: DiameterFunction
    tree: SubdivisionTree
    constants: dict[str, Any]
    sandwich_log: list[tuple[int, int, float, float]]
    curve: Normalized
    source_model: DiameterFunction | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def tree_model(self) -> DiameterFunction:
        """The model whose grid matches the tree (differs from ``model`` after a collapse)."""
        return self.source_model or self.model

    def to_dict(self) -> dict[str, Any]:
        out = self.model.to_dict()
        out["build"] = self.kind
        out["tree"] = self.tree.to_dict()
        out["constants"] = {k: format_number(v) if isinstance(v, Fraction) else v for k, v in self.constants.items()}
        out["sandwich_log"] = [list(row) for row in self.sandwich_log]
        out["curve"] = self.curve.to_dict()
        out["curve_scale"] = self.curve.scale
        if self.source_model is not None:
            out["source_model"] = self.source_model.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BuildResult:
        model = DiameterFunction.from_dict(data)
        source = DiameterFunction.from_dict(data["source_model"]) if "source_model" in data else None
        consts = {k: parse_number(v) if isinstance(v, str) else v for k, v in data["constants"].items()}
        return cls(
            data["build"],
            model,
            SubdivisionTree.from_dict(data["tree"]),
            consts,
            [tuple(row) for row in data.get("sandwich_log", [])],
            Normalized(curve_from_dict(data["curve"]), data.get("curve_scale")),
            source,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> BuildResult:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _first_split(curve: Normalized, N: int, tol: float) -> tuple[list[Real], list[float]]:
    """Generation-1 division from a diametral pair (N = 2) or from its first point."""
    x, y = curve.diametral_pair()
    if N == 2:
        if not curve.exact_params:
            x, y = float(x), float(y)
        pts = [x, y]
    else:
        split = split_span(curve, x, Fraction(1) if isinstance(x, Fraction) else 1.0, N, tol)
        pts = [x] + split.points
    tree = SubdivisionTree(N, [[x], pts], [[curve.diameter()], []])
    tree.diameters[1] = [curve.span_diam(s % 1, e - s) for s, e in (tree.arc(1, k) for k in range(N))]
    return tree.points[1], tree.diameters[1]


def _children(curve: Normalized, s: Real, e: Real, N: int, tol: float) -> tuple[list[Real], list[float]]:
    split = split_span(curve, s % 1 if isinstance(s, Fraction) else float(s) % 1.0, e - s, N, tol)
    return [s % 1] + split.points, split.diameters


def _log_run_horizon(levels: list[str], base_exponent: int) -> int:
    probe = DiameterFunction(Fraction(1), ChoiceSource.explicit(levels), base_exponent, halving_horizon=None)
    run, _ = snow_runs(probe, len(levels) + 1)
    return run + 1


def build_theorem_a(curve: MetricCurve, depth: int = 10, tol: float = 1e-9) -> BuildResult:
    """Binary equal-diameter subdivision with Δ kept or halved to track the diameters.

    Every recorded arc satisfies Δ/2 <= diam <= 2Δ on the normalized curve.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    curve = normalize(curve)
    pts1, diam1 = _first_split(curve, 2, tol)
    points, diams = [[pts1[0]], pts1], [[1.0], diam1]
    deltas: list[list[Fraction]] = [[Fraction(1)], [Fraction(1), Fraction(1)]]
    levels = ["1"]
    tree = SubdivisionTree(2, points, diams)
    for n in range(1, depth):
        bits, new_pts, new_diams, new_deltas = [], [], [], []
        for k in range(2**n):
            delta, diam = deltas[n][k], diams[n][k]
            keep = delta <= diam
            bits.append("1" if keep else "0")
            s, e = tree.arc(n, k)
            kids, kid_diams = _children(curve, s, e, 2, tol)
            new_pts += kids
            new_diams += kid_diams
            child = delta if keep else delta / 2
            new_deltas += [child, child]
        levels.append("".join(bits))
        points.append(new_pts)
        diams.append(new_diams)
        deltas.append(new_deltas)
    log = []
    for n in range(1, depth + 1):
        for k, (delta, diam) in enumerate(zip(deltas[n], diams[n])):
            lo, hi = float(delta) / 2, 2 * float(delta)
            if not lo * (1 - SANDWICH_SLACK) <= diam <= hi * (1 + SANDWICH_SLACK):
                raise BuildError(f"sandwich fails at arc {n}:{k}: Δ={float(delta)}, diam={diam}")
            log.append((n, k, float(delta), diam))
    model = DiameterFunction(Fraction(1), ChoiceSource.explicit(levels), 1, _log_run_horizon(levels, 1))
    consts = {
        "C": 1,
        "K": 2,
        "M": 2,
        "m": 1,
        "sigma": 1,
        "tau": 1,
        "L": 8,
        "diam": curve.scale,
        "L_original": 8 * max(curve.scale, 1 / curve.scale),
    }
    return BuildResult("theorem_a", model, tree, consts, log, curve)


def separation_threshold(curve: MetricCurve, beta: float, samples: int = 24, seed: int = 0, grid: int = 256) -> float:
    """Empirical ε0: the largest ε on a dyadic grid where sampled ε·diam-separated sets stay below ε^-β.

    Sub-curves are random arcs; separated sets come from greedy farthest-point insertion.
    """
    curve = normalize(curve)
    rng = np.random.default_rng(seed)
    eps_grid = [2.0**-j for j in range(1, 9)]
    worst = {e: 0 for e in eps_grid}
    for _ in range(samples):
        start, length = rng.random(), rng.uniform(0.05, 1.0)
        ts = (start + length * np.linspace(0, 1, grid)) % 1.0
        a, b = np.meshgrid(ts, ts, indexing="ij")
        dist = curve.distances(a.ravel(), b.ravel()).reshape(grid, grid)
        radii = _insertion_radii(dist)
        diam = dist.max()
        for e in eps_grid:
            worst[e] = max(worst[e], int((radii >= e * diam).sum()))
    good = [e for e in eps_grid if worst[e] < e**-beta]
    return max(good) if good else min(eps_grid)


def _insertion_radii(dist: np.ndarray) -> np.ndarray:
    """Farthest-point insertion radii; the first point gets +inf."""
    n = dist.shape[0]
    radii = np.empty(n)
    radii[0] = np.inf
    near = dist[0].copy()
    for i in range(1, n):
        j = int(np.argmax(near))
        radii[i] = near[j]
        near = np.minimum(near, dist[j])
    return radii


def choose_m(curve: MetricCurve, sigma: float, seed: int = 0) -> tuple[int, float]:
    """Least m with σ^m below half the empirical separation threshold."""
    beta = math.log(2) / math.log(1 / float(sigma))
    eps0 = separation_threshold(curve, beta, seed=seed)
    m = 1
    while float(sigma) ** m >= eps0 / 2:
        m += 1
    return m, eps0


def _build_madic(curve: MetricCurve, tau: Real, m: int, depth: int, tol: float, kind: str, sigma: Real) -> BuildResult:
    M = 2**m
    if M**depth > MAX_TREE_ARCS:
        raise ResourceError(f"{M}^{depth} arcs exceed the tree limit {MAX_TREE_ARCS}")
    if not Fraction(1, M) < tau < 1:
        raise DomainError(f"tau = {tau} must lie in (1/{M}, 1)")
    curve = normalize(curve)
    slack = 1 + SANDWICH_SLACK
    pts1, diam1 = _first_split(curve, M, tol)
    points, diams = [[pts1[0]], pts1], [[1.0], diam1]
    tree = SubdivisionTree(M, points, diams)

    def check_split(n: int, k: int, parent: float, kids: list[float]) -> None:
        for i, d in enumerate(kids):
            if not parent / M / slack <= d <= float(tau) * parent * slack:
                raise BuildError(
                    f"split of arc {n}:{k} gives child {i} with diameter ratio {d / parent:.6g} outside "
                    f"[1/{M}, {float(tau):.6g}]; the curve may need a larger m"
                )

    check_split(0, 0, 1.0, diam1)
    deltas: list[list[Real]] = [[1], [tau] * M]
    levels = ["1"]
    for n in range(1, depth):
        bits, new_pts, new_diams, new_deltas = [], [], [], []
        for k in range(M**n):
            delta, diam = deltas[n][k], diams[n][k]
            keep = delta <= diam
            bits.append("1" if keep else "0")
            s, e = tree.arc(n, k)
            kids, kid_diams = _children(curve, s, e, M, tol)
            check_split(n, k, diam, kid_diams)
            new_pts += kids
            new_diams += kid_diams
            new_deltas += [tau * delta if keep else delta / M] * M
        levels.append("".join(bits))
        points.append(new_pts)
        diams.append(new_diams)
        deltas.append(new_deltas)
    K = tau * M
    log = []
    for n in range(1, depth + 1):
        for k, (delta, diam) in enumerate(zip(deltas[n], diams[n])):
            if not float(delta / K) / slack <= diam <= float(K * delta) * slack:
                raise BuildError(f"K-sandwich fails at arc {n}:{k}: Δ={float(delta)}, diam={diam}")
            log.append((n, k, float(delta), diam))
    model = DiameterFunction(tau, ChoiceSource.explicit(levels), m)
    L = 2 * tau * M * M
    consts = {
        "C": 1,
        "m": m,
        "M": M,
        "sigma": sigma,
        "tau": tau,
        "K": K,
        "L": L,
        "ML": M * L,
        "diam": curve.scale,
        "L_original": M * L * max(curve.scale, 1 / curve.scale),
    }
    return BuildResult(kind, model, tree, consts, log, curve)


def _power(x: Real, m: int) -> Real:
    return x**m


def build_theorem_b(
    curve: MetricCurve,
    sigma: Real,
    m: int | None = None,
    depth: int = 4,
    tol: float = 1e-9,
    alpha: float | None = None,
    seed: int = 0,
) -> BuildResult:
    """M-ary build with τ = σ^m and children factors τ or 1/M (M = 2^m)."""
    sigma = parse_number(sigma) if isinstance(sigma, str) else sigma
    if not 0.5 < sigma < 1:
        raise DomainError("sigma must lie in (1/2, 1)")
    if alpha is not None and not sigma > 2 ** (-1 / alpha):
        raise DomainError(f"sigma must exceed 2^(-1/alpha) = {2 ** (-1 / alpha):.6g}")
    notes = []
    if m is None:
        m, eps0 = choose_m(curve, float(sigma), seed)
        notes.append(f"m={m} chosen from estimated separation threshold {eps0:g}")
    result = _build_madic(curve, _power(sigma, m), m, depth, tol, "theorem_b", sigma)
    result.notes = notes
    return result


def build_4adic(
    curve: MetricCurve,
    p: Real,
    depth: int = 3,
    m: int | None = None,
    tol: float = 1e-9,
    alpha: float | None = None,
    seed: int = 0,
) -> BuildResult:
    """Run the M-ary build with even m = 2k and σ = √p, then collapse to a 4-adic model with parameter p."""
    p = parse_number(p) if isinstance(p, str) else p
    if not 0.25 < p < 1:
        raise DomainError("p must lie in (1/4, 1)")
    if alpha is not None and not p > 4 ** (-1 / alpha):
        raise DomainError(f"p must exceed 4^(-1/alpha) = {4 ** (-1 / alpha):.6g}")
    sigma = exact_root(p, 2) if isinstance(p, Fraction) else None
    sigma = sigma if sigma is not None else float(p) ** 0.5
    notes = []
    if m is None:
        m, eps0 = choose_m(curve, float(sigma), seed)
        notes.append(f"m chosen from estimated separation threshold {eps0:g}")
    if m % 2:
        m += 1
    k = m // 2
    tau = _power(p, k)
    result = _build_madic(curve, tau, m, depth, tol, "4adic", sigma)
    collapsed = extend_to_dyadic(result.model, 2) if m > 2 else result.model
    result.source_model, result.model = result.model, collapsed
    result.constants["p"] = collapsed.parameter
    result.notes = notes
    return result


def _tree_arc_for(result: BuildResult, s: Real, n: int) -> tuple[int, bool]:
    base = result.tree.base
    scaled = s * base**n
    k = math.floor(scaled)
    return k % base**n, scaled == k


def map_point(result: BuildResult, s: CirclePoint | Real | str, tol: float = 1e-6) -> Real:
    """Image parameter of s under the tree correspondence.

    Grid endpoints go to recorded division points exactly; other points go to
    the midpoint of the first image arc with diameter below ``tol``.
    """
    s = s if isinstance(s, CirclePoint) else CirclePoint.parse(s)
    x = s.value
    tree = result.tree
    achieved = 1.0
    for n in range(1, tree.depth + 1):
        k, on_grid = _tree_arc_for(result, x, n)
        if on_grid:
            return tree.points[n][k]
        achieved = tree.diameters[n][k]
        if achieved < tol:
            a, b = tree.arc(n, k)
            return ((a + b) / 2) % 1
    raise InsufficientDepthError(f"tree depth {tree.depth} reaches image diameter {achieved:.3g} > {tol:g}", achieved)


def image_bracket(result: BuildResult, s: Real) -> tuple[Real, float]:
    """A parameter in the image arc of s at full depth, with that arc's diameter (0 when exact)."""
    tree = result.tree
    for n in range(1, tree.depth + 1):
        k, on_grid = _tree_arc_for(result, s, n)
        if on_grid:
            return tree.points[n][k], 0.0
    a, b = tree.arc(tree.depth, k)
    return ((a + b) / 2) % 1, tree.diameters[tree.depth][k]
