"""Diameter functions on dyadic, 2^m-adic and 4-adic grids."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .dyadic import DyadicArc, format_number, parse_number
from .errors import GridError, ModelError, UnboundedError

SNOW, HALF = 1, 0
NAMED_RULES = ("all_snow", "all_half", "alternating", "random_bernoulli", "growing_runs")


def _splitmix(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def uniform_hash(seed: int, level: int, indices: np.ndarray) -> np.ndarray:
    """Deterministic uniforms in [0,1) keyed by (seed, level, index)."""
    key = _splitmix(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    key = _splitmix(key ^ np.uint64(level))
    z = _splitmix(key ^ indices.astype(np.uint64))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def growing_run_levels(upto: int) -> set[int]:
    """SNOW levels of the growing-run rule: runs of length 1, 2, 4, ... split by one HALF."""
    snow, level, run = set(), 0, 1
    while level < upto:
        snow.update(range(level, level + run))
        level += run + 1
        run *= 2
    return snow


@dataclass(frozen=True)
class ChoiceSource:
    """Per-parent SNOW/HALF choices: explicit bit strings or a named rule.

    ``kind`` is "explicit_levels", "named_rule" or "extended" (the choices of
    a coarser grid read through an extension, see :func:`extend_to_dyadic`).
    """

    kind: str
    levels: tuple[str, ...] = ()
    rule: str | None = None
    params: tuple[tuple[str, Any], ...] = ()
    seed: int = 0
    fallback: ChoiceSource | None = None
    source_exponent: int = 0
    stride: int = 1

    def __post_init__(self) -> None:
        if self.kind == "named_rule":
            if self.rule not in NAMED_RULES:
                raise ModelError(f"unknown rule {self.rule!r}; known: {', '.join(NAMED_RULES)}")
        elif self.kind == "explicit_levels":
            for s in self.levels:
                if set(s) - {"0", "1"}:
                    raise ModelError("level strings may only contain '0' and '1'")
        elif self.kind != "extended":
            raise ModelError(f"unknown choice kind {self.kind!r}")

    @classmethod
    def named(cls, rule: str, seed: int = 0, **params: Any) -> ChoiceSource:
        return cls("named_rule", rule=rule, params=tuple(sorted(params.items())), seed=seed)

    @classmethod
    def explicit(cls, levels: list[str], fallback: ChoiceSource | None = None) -> ChoiceSource:
        return cls("explicit_levels", levels=tuple(levels), fallback=fallback)

    @property
    def param_dict(self) -> dict[str, Any]:
        return dict(self.params)

    def check_shape(self, base_exponent: int) -> None:
        base = 2**base_exponent
        for g, s in enumerate(self.levels):
            if len(s) != base**g:
                raise ModelError(f"level {g} needs {base ** g} bits, got {len(s)}")

    def bits(self, level: int, indices: np.ndarray, base_exponent: int) -> np.ndarray:
        """Choice bits for the parent arcs ``indices`` of grid level ``level``."""
        indices = np.asarray(indices, dtype=np.int64)
        if self.kind == "explicit_levels":
            if level < len(self.levels):
                row = np.frombuffer(self.levels[level].encode(), dtype=np.uint8) - ord("0")
                return row[indices]
            if self.fallback is not None:
                return self.fallback.bits(level, indices, base_exponent)
            return np.zeros(indices.shape, dtype=np.uint8)
        if self.kind == "extended":
            q, i = divmod(level, self.stride)
            anc = indices >> (base_exponent * i)
            return self.fallback.bits(q, anc, self.source_exponent)
        p = self.param_dict
        if self.rule == "all_snow":
            return np.ones(indices.shape, dtype=np.uint8)
        if self.rule == "all_half":
            return np.zeros(indices.shape, dtype=np.uint8)
        if self.rule == "alternating":
            bit = int((level + int(p.get("phase", 0))) % 2 == 0)
            return np.full(indices.shape, bit, dtype=np.uint8)
        if self.rule == "random_bernoulli":
            u = uniform_hash(self.seed, level, indices)
            return (u < float(p.get("p_snow", 0.5))).astype(np.uint8)
        # growing_runs
        on = level in growing_run_levels(level + 1)
        return ((indices == 0) & on).astype(np.uint8)

    def bit(self, level: int, index: int, base_exponent: int) -> int:
        if self.kind == "named_rule" and self.rule in ("all_snow", "all_half", "alternating"):
            if self.rule == "alternating":
                return int((level + int(self.param_dict.get("phase", 0))) % 2 == 0)
            return int(self.rule == "all_snow")
        if index < 2**63:
            return int(self.bits(level, np.array([index]), base_exponent)[0])
        # indices past int64 only occur far below any explicit level
        if self.kind == "extended":
            q, i = divmod(level, self.stride)
            return self.fallback.bit(q, index >> (base_exponent * i), self.source_exponent)
        if self.kind == "explicit_levels":
            return 0 if self.fallback is None else self.fallback.bit(level, index, base_exponent)
        if self.rule in ("random_bernoulli",):
            folded = 0
            while index:
                folded ^= index & 0xFFFFFFFFFFFFFFFF
                index >>= 64
            u = uniform_hash(self.seed, level, np.array([folded], dtype=np.uint64))[0]
            return int(u < float(self.param_dict.get("p_snow", 0.5)))
        # every remaining rule is constant along a level away from index 0
        return int(self.bits(level, np.array([1]), base_exponent)[0])

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "explicit_levels":
            out: dict[str, Any] = {"kind": self.kind, "levels": list(self.levels)}
            if self.fallback is not None:
                out["fallback"] = self.fallback.to_dict()
            return out
        if self.kind == "named_rule":
            return {"kind": self.kind, "rule": self.rule, "params": self.param_dict, "seed": self.seed}
        raise ModelError("extended choices must be materialized before serialization")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ChoiceSource:
        kind = data.get("kind")
        if kind == "explicit_levels":
            fb = data.get("fallback")
            return cls.explicit(list(data["levels"]), cls.from_dict(fb) if fb else None)
        if kind == "named_rule":
            return cls.named(data["rule"], int(data.get("seed", 0)), **data.get("params", {}))
        raise ModelError(f"unknown choice kind {kind!r}")


def exact_root(x: Fraction, r: int) -> Fraction | None:
    """The rational r-th root of x if it exists."""
    if r == 1:
        return x
    roots = []
    for part in (x.numerator, x.denominator):
        c = round(part ** (1.0 / r))
        hit = next((c + d for d in (-1, 0, 1) if c + d >= 0 and (c + d) ** r == part), None)
        if hit is None:
            return None
        roots.append(hit)
    return Fraction(roots[0], roots[1])


@dataclass(frozen=True)
class DiameterFunction:
    """Δ on the 2^m-adic grid; ``parameter`` is the SNOW factor.

    Values are exact Fractions when the parameter is rational and ``exact``
    is left on, otherwise floats.
    """

    parameter: Fraction | float
    choices: ChoiceSource
    base_exponent: int = 1
    halving_horizon: int | None = None
    exact: bool | None = None
    origin: DiameterFunction | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        par = self.parameter
        if isinstance(par, (int, str)) and not isinstance(par, bool):
            par = parse_number(par)
            object.__setattr__(self, "parameter", par)
        if self.exact is None:
            object.__setattr__(self, "exact", isinstance(par, Fraction))
        elif self.exact and not isinstance(par, Fraction):
            raise ModelError("exact mode needs a rational parameter")
        if self.base_exponent < 1:
            raise ModelError("base exponent must be >= 1")
        if not Fraction(1, self.base) <= par <= 1:
            raise ModelError(f"parameter {par} outside [1/{self.base}, 1]")
        self.choices.check_shape(self.base_exponent)

    @property
    def base(self) -> int:
        return 2**self.base_exponent

    @property
    def half_factor(self) -> Fraction | float:
        f = Fraction(1, self.base)
        return f if self.exact else float(f)

    @property
    def snow_factor(self) -> Fraction | float:
        return self.parameter if self.exact else float(self.parameter)

    def grid_level(self, arc: DyadicArc) -> int:
        if arc.generation % self.base_exponent:
            raise GridError(f"arc {arc} is off the 2^{self.base_exponent}-adic grid")
        return arc.generation // self.base_exponent

    def bit(self, level: int, index: int) -> int:
        return self.choices.bit(level, index, self.base_exponent)

    def value_at(self, level: int, index: int) -> Fraction | float:
        """Δ of the grid arc with grid level ``level`` and index ``index``."""
        key = (level, index)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.origin is not None and level % self.choices.stride == 0:
            val = self.origin.value_at(level // self.choices.stride, index)
            val = val if self.exact else float(val)
        else:
            m = self.base_exponent
            # walk up to the nearest cached ancestor
            path = []
            lvl, idx = level, index
            while lvl > 0 and (lvl, idx) not in self._cache:
                if self.origin is not None and lvl % self.choices.stride == 0:
                    break
                path.append((lvl, idx))
                lvl, idx = lvl - 1, idx >> m
            if lvl == 0:
                val = Fraction(1) if self.exact else 1.0
            else:
                val = self.value_at(lvl, idx)
            for lvl, idx in reversed(path):
                parent = idx >> m
                f = self.snow_factor if self.bit(lvl - 1, parent) else self.half_factor
                val = val * f
                self._cache[(lvl, idx)] = val
            return val
        self._cache[key] = val
        return val

    def value(self, arc: DyadicArc) -> Fraction | float:
        return self.value_at(self.grid_level(arc), arc.index)

    def level_values(self, level: int) -> np.ndarray:
        """Float Δ values of every arc of one grid level, in index order."""
        key = ("levels", level)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if level == 0:
            vals = np.ones(1)
        else:
            parent = self.level_values(level - 1)
            bits = self.choices.bits(level - 1, np.arange(parent.size), self.base_exponent)
            fac = np.where(bits == 1, float(self.parameter), 1.0 / self.base)
            vals = np.repeat(parent * fac, self.base)
            if self.origin is not None and level % self.choices.stride == 0:
                vals = self.origin.level_values(level // self.choices.stride).astype(float)
        vals.setflags(write=False)
        self._cache[key] = vals
        return vals

    def as_float(self) -> DiameterFunction:
        if not self.exact:
            return self
        return DiameterFunction(
            float(self.parameter), self.choices, self.base_exponent, self.halving_horizon, False, self.origin
        )

    def to_dict(self) -> dict[str, Any]:
        df = materialize(self) if self.choices.kind == "extended" else self
        out = {
            "base_exponent": df.base_exponent,
            "parameter": format_number(df.parameter),
            "halving_horizon": df.halving_horizon,
            "choices": df.choices.to_dict(),
        }
        if not df.exact and isinstance(df.parameter, Fraction):
            out["exact"] = False
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DiameterFunction:
        try:
            par = data["parameter"]
            par = parse_number(par) if isinstance(par, str) else float(par)
            return cls(
                par,
                ChoiceSource.from_dict(data["choices"]),
                int(data.get("base_exponent", 1)),
                data.get("halving_horizon"),
                data.get("exact"),
            )
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed model: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> DiameterFunction:
        return cls.from_dict(json.loads(Path(path).read_text()))


def value(df: DiameterFunction, arc: DyadicArc) -> Fraction | float:
    return df.value(arc)


def materialize(df: DiameterFunction, levels: int | None = None) -> DiameterFunction:
    """Copy of ``df`` whose choices are explicit bit strings up to ``levels``."""
    if levels is None:
        src = df.choices
        while src.kind == "extended":
            src = src.fallback
        if src.kind != "explicit_levels" or (src.fallback is not None and src.fallback.rule != "all_half"):
            raise ModelError("only explicit-level functions can be materialized without a depth")
        levels = len(src.levels) * df.choices.stride if df.choices.kind == "extended" else len(src.levels)
    rows = []
    for g in range(levels):
        bits = df.choices.bits(g, np.arange(df.base**g), df.base_exponent)
        rows.append("".join("1" if b else "0" for b in bits))
    return DiameterFunction(df.parameter, ChoiceSource.explicit(rows), df.base_exponent, df.halving_horizon, df.exact)


@dataclass
class ValidationReport:
    valid: bool
    reasons: list[str]
    witness: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"valid": self.valid, "reasons": self.reasons, "witness": self.witness}


def snow_runs(df: DiameterFunction, levels: int) -> tuple[int, dict[str, Any] | None]:
    """Longest run of consecutive SNOW choices along any branch above grid level ``levels``.

    Returns the run length and a witness: the parent arcs carrying the run.
    """
    base = df.base
    run = np.zeros(1, dtype=np.int64)
    best, where = 0, None
    for g in range(levels):
        bits = df.choices.bits(g, np.arange(base**g), df.base_exponent)
        inherited = np.repeat(run, base) if g else run
        run = np.where(bits == 1, inherited + 1, 0)
        k = int(np.argmax(run))
        if run[k] > best:
            best, where = int(run[k]), (g, k)
    if where is None:
        return 0, None
    g, k = where
    branch = [f"{(g - i) * df.base_exponent}:{k >> (df.base_exponent * i)}" for i in range(best)][::-1]
    return best, {"start_level": g - best + 1, "length": best, "branch": branch}


def validate(df: DiameterFunction, depth: int) -> ValidationReport:
    """Check the structural rules of Δ down to dyadic generation ``depth``."""
    reasons: list[str] = []
    witness = None
    par = df.parameter
    if not Fraction(1, df.base) <= par <= 1:
        reasons.append(f"parameter {par} outside [1/{df.base}, 1]")
    levels = max(depth // df.base_exponent, 1)
    tol = 0.0 if df.exact else 1e-12
    prev = df.level_values(0)
    if prev[0] != 1.0:
        reasons.append("value of the whole circle is not 1")
    for g in range(1, levels + 1):
        cur = df.level_values(g)
        ratio = cur / np.repeat(prev, df.base)
        ok = np.isclose(ratio, 1.0 / df.base, rtol=tol, atol=0) | np.isclose(ratio, float(par), rtol=tol, atol=0)
        if not ok.all():
            reasons.append(f"child factor outside {{1/{df.base}, {par}}} at grid level {g}")
            break
        grouped = cur.reshape(-1, df.base)
        if not (grouped == grouped[:, :1]).all():
            reasons.append(f"children of one parent disagree at grid level {g}")
            break
        prev = cur
    if par == 1:
        h = df.halving_horizon
        if h is None:
            reasons.append("shrinking not certified: parameter 1 needs a halving_horizon")
        else:
            run, wit = snow_runs(df, levels)
            if run >= h:
                reasons.append(f"a run of {run} SNOW choices breaks the halving horizon {h}")
                witness = wit
    return ValidationReport(not reasons, reasons, witness)


def extend_to_dyadic(df: DiameterFunction, target_exponent: int = 1) -> DiameterFunction:
    """Refine a 2^m-adic Δ to the 2^e-adic grid (e divides m) by geometric interpolation."""
    m, e = df.base_exponent, target_exponent
    if m % e or m == e:
        raise ModelError(f"cannot extend base exponent {m} to {e}")
    r = m // e
    par = df.parameter
    if isinstance(par, Fraction):
        root = exact_root(par, r)
        new_par: Fraction | float = root if root is not None else par ** (1.0 / r)
    else:
        new_par = par ** (1.0 / r)
    exact = df.exact and isinstance(new_par, Fraction)
    choices = ChoiceSource("extended", fallback=df.choices, source_exponent=m, stride=r)
    horizon = None if df.halving_horizon is None else df.halving_horizon * r
    return DiameterFunction(new_par, choices, e, horizon, exact, df)


def assouad_upper(df: DiameterFunction) -> float:
    """Upper bound m log 2 / log(1/parameter) for the Assouad dimension."""
    par = float(df.parameter)
    if par >= 1:
        raise UnboundedError("parameter 1 gives no finite Assouad bound")
    return df.base_exponent * math.log(2) / math.log(1 / par)


@dataclass
class DoublingResult:
    status: str
    n0: int | None = None
    N: int | None = None
    witness: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status, "n0": self.n0, "N": self.N, "witness": self.witness}


def _doubling(df: DiameterFunction, n0: int) -> DoublingResult:
    return DoublingResult("doubling", n0, 2 ** (df.base_exponent * (n0 + 1) + 1))


def _bounded_rule(src: ChoiceSource) -> bool:
    """True when the choices beyond any finite depth have SNOW runs of length <= 1."""
    if src.kind == "explicit_levels":
        return src.fallback is None or _bounded_rule(src.fallback)
    if src.kind == "extended":
        return False
    return src.rule in ("all_half", "alternating") or (
        src.rule == "random_bernoulli" and float(src.param_dict.get("p_snow", 0.5)) == 0
    )


def doubling_test(df: DiameterFunction, horizon: int, max_scan: int = 20) -> DoublingResult:
    """Find n0 with Δ(I^{n+n0}) <= Δ(I^n)/2 along every descent, or a long SNOW run."""
    par = float(df.parameter)
    half = 1.0 / df.base
    if par < 1:
        n0 = 1
        while max(par, half) ** n0 > 0.5:
            n0 += 1
        return _doubling(df, n0)
    src = df.choices
    if src.kind == "named_rule" and src.rule in ("all_snow", "growing_runs"):
        if src.rule == "all_snow":
            run_start = 0
        else:
            run_start, level, run = None, 0, 1
            while run_start is None:
                if run >= horizon:
                    run_start = level
                level, run = level + run + 1, run * 2
        branch = [f"{(run_start + i) * df.base_exponent}:0" for i in range(horizon)]
        return DoublingResult("not_doubling", witness={"start_level": run_start, "length": horizon, "branch": branch})
    depth = len(src.levels) if src.kind == "explicit_levels" else 0
    scan = min(depth + horizon + 1, max(max_scan // df.base_exponent, 1))
    run, wit = snow_runs(df, scan)
    if run >= horizon:
        return DoublingResult("not_doubling", witness=wit)
    if _bounded_rule(src) and scan >= depth + 2:
        return _doubling(df, run + 1)
    return DoublingResult("inconclusive", witness=wit)
