"""Dyadic and 2^m-adic arithmetic on the circle [0,1]/{0~1}."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import DomainError, GridError

Number = Union[int, float, Fraction, str]

_POW_RE = re.compile(r"^\s*(-?\d+)\s*/\s*2\s*\^\s*(\d+)\s*$")


def dyadic_level(x: Fraction) -> int | None:
    """Least n with x * 2^n an integer, or None when x is not dyadic."""
    den = x.denominator
    if den & (den - 1):
        return None
    return den.bit_length() - 1


def parse_number(text: Number) -> Fraction | float:
    """Parse "p/2^n", "a/b", a decimal literal or a number.

    Strings always parse exactly; floats stay floats.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise DomainError(f"not a number: {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return text
    m = _POW_RE.match(text)
    if m:
        return Fraction(int(m.group(1)), 2 ** int(m.group(2)))
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"cannot parse number {text!r}") from exc


def format_number(x: Fraction | float) -> str | float:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return float(x)


@dataclass(frozen=True, order=True)
class CirclePoint:
    """A point of the circle; exact when constructed from a rational."""

    value: Fraction | float

    def __post_init__(self) -> None:
        v = self.value
        if isinstance(v, int) and not isinstance(v, bool):
            v = Fraction(v)
        if isinstance(v, Fraction):
            v = v - (v.numerator // v.denominator)
        else:
            v = float(v) % 1.0
        object.__setattr__(self, "value", v)

    @classmethod
    def parse(cls, text: Number) -> CirclePoint:
        return cls(parse_number(text))

    @property
    def exact(self) -> bool:
        return isinstance(self.value, Fraction)

    @property
    def level(self) -> int | None:
        """Dyadic generation of the point (0 for the base point 0)."""
        return dyadic_level(self.value) if self.exact else None

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        return str(format_number(self.value))


@dataclass(frozen=True, order=True)
class DyadicArc:
    """The arc [k/2^n, (k+1)/2^n]."""

    generation: int
    index: int

    def __post_init__(self) -> None:
        if self.generation < 0:
            raise DomainError("generation must be nonnegative")
        if not 0 <= self.index < 2**self.generation:
            raise DomainError(f"index {self.index} out of range for generation {self.generation}")

    @classmethod
    def parse(cls, text: str) -> DyadicArc:
        try:
            n, k = text.split(":")
            return cls(int(n), int(k))
        except ValueError as exc:
            raise DomainError(f"arcs are written 'n:k', got {text!r}") from exc

    def __str__(self) -> str:
        return f"{self.generation}:{self.index}"

    @property
    def start(self) -> Fraction:
        return Fraction(self.index, 2**self.generation)

    @property
    def end(self) -> Fraction:
        """Right endpoint in [0,1]; equals 1 for the last arc of a generation."""
        return Fraction(self.index + 1, 2**self.generation)

    @property
    def length(self) -> Fraction:
        return Fraction(1, 2**self.generation)

    def parent(self, step: int = 1) -> DyadicArc:
        if self.generation < step:
            raise DomainError(f"arc {self} has no ancestor {step} generations up")
        return DyadicArc(self.generation - step, self.index >> step)

    def children(self, base_exponent: int = 1) -> list[DyadicArc]:
        n, k, m = self.generation, self.index, base_exponent
        if n % m:
            raise GridError(f"arc {self} is not on the 2^{m}-adic grid")
        return [DyadicArc(n + m, (k << m) + i) for i in range(2**m)]

    def sibling(self) -> DyadicArc:
        if self.generation == 0:
            raise DomainError("the whole circle has no sibling")
        return DyadicArc(self.generation, self.index ^ 1)

    def contains_point(self, x: Fraction) -> bool:
        if self.generation == 0:
            return True
        return self.start <= x <= self.end or (x == 0 and self.end == 1)


def arc_navigate(arc: DyadicArc, relation: str, base_exponent: int = 1) -> list[DyadicArc]:
    """Navigate the arc tree: relation is "parent", "children" or "sibling"."""
    if relation == "parent":
        return [arc.parent(base_exponent)]
    if relation == "children":
        return arc.children(base_exponent)
    if relation == "sibling":
        return [arc.sibling()]
    raise DomainError(f"unknown relation {relation!r}")


def arc_relation(a: DyadicArc, b: DyadicArc) -> str:
    """Set relation between two dyadic arcs, with the circle wrap respected."""
    n = max(a.generation, b.generation)
    total = 2**n
    sa, ea = a.index << (n - a.generation), (a.index + 1) << (n - a.generation)
    sb, eb = b.index << (n - b.generation), (b.index + 1) << (n - b.generation)
    if (sa, ea) == (sb, eb):
        return "equal"
    if sa <= sb and eb <= ea:
        return "a_contains_b"
    if sb <= sa and ea <= eb:
        return "b_contains_a"
    if max(sa, sb) < min(ea, eb):
        return "overlap"
    if ea == sb or eb == sa or (ea == total and sb == 0) or (eb == total and sa == 0):
        return "touch_at_endpoint"
    return "disjoint"


@dataclass(frozen=True)
class GeneralArc:
    """The closed arc traversed forward from start to end."""

    start: CirclePoint
    end: CirclePoint

    def __post_init__(self) -> None:
        if not isinstance(self.start, CirclePoint):
            object.__setattr__(self, "start", CirclePoint(self.start))
        if not isinstance(self.end, CirclePoint):
            object.__setattr__(self, "end", CirclePoint(self.end))
        if self.start.value == self.end.value:
            raise DomainError("degenerate arc: start equals end")

    @classmethod
    def parse(cls, start: Number, end: Number) -> GeneralArc:
        return cls(CirclePoint.parse(start), CirclePoint.parse(end))

    @classmethod
    def of(cls, arc: DyadicArc) -> GeneralArc:
        if arc.generation == 0:
            raise DomainError("the whole circle is not a GeneralArc")
        return cls(CirclePoint(arc.start), CirclePoint(arc.end))

    @property
    def length(self) -> Fraction | float:
        d = self.end.value - self.start.value
        return d + 1 if d < 0 else d

    def offset(self, x: Fraction | float) -> Fraction | float:
        """Forward distance from start to x, in [0,1)."""
        d = x - self.start.value
        return d + 1 if d < 0 else d

    def contains(self, x: Fraction | float) -> bool:
        return self.offset(x) <= self.length

    def contains_arc(self, arc: DyadicArc) -> bool:
        if arc.generation == 0:
            return False
        off = self.offset(arc.start)
        return off + arc.length <= self.length


def grid_cover(start: Fraction, length: Fraction, base_exponent: int, max_level: int) -> list[DyadicArc]:
    """Maximal 2^m-adic arcs of grid level <= max_level tiling [start, start+length].

    Both ends must lie on the grid of level max_level; the arc may wrap.
    """
    m = base_exponent
    scale = 2 ** (m * max_level)
    lo, hi = start * scale, (start + length) * scale
    if lo.denominator != 1 or hi.denominator != 1:
        raise GridError("endpoints are not on the requested grid")
    pos, stop = int(lo), int(hi)
    out: list[DyadicArc] = []
    while pos < stop:
        # largest grid block aligned at pos that fits
        level = max_level
        while level > 0:
            size = 2 ** (m * (max_level - level + 1))
            if pos % size or pos + size > stop:
                break
            level -= 1
        size = 2 ** (m * (max_level - level))
        k = (pos // size) % (2 ** (m * level))
        out.append(DyadicArc(m * level, k))
        pos += size
    return out


def canonical_cover(arc: GeneralArc, max_generation: int) -> list[DyadicArc]:
    """Ordered maximal dyadic tiling of an arc with dyadic endpoints."""
    for p in (arc.start, arc.end):
        lvl = p.level
        if lvl is None or lvl > max_generation:
            raise DomainError(f"endpoint {p} is not dyadic of generation <= {max_generation}")
    return grid_cover(arc.start.value, arc.length, 1, max_generation)
