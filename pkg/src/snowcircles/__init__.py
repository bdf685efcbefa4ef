"""Metric circles built from dyadic diameter functions, and their planar snowflake counterparts."""

from .builders import BuildResult, build_4adic, build_theorem_a, build_theorem_b, image_bracket, map_point
from .curves import (
    ModelCircle,
    Normalized,
    Polyline,
    RoundCircle,
    SnowflakePower,
    SubdivisionTree,
    equal_diameter_split,
)
from .diameter import ChoiceSource, DiameterFunction, assouad_upper, doubling_test, extend_to_dyadic, validate
from .dyadic import CirclePoint, DyadicArc, GeneralArc
from .model_metric import MetricBracket, arc_diameter, brute_force_distance, distance

__all__ = [
    "BuildResult",
    "ChoiceSource",
    "CirclePoint",
    "DiameterFunction",
    "DyadicArc",
    "GeneralArc",
    "MetricBracket",
    "ModelCircle",
    "Normalized",
    "Polyline",
    "RoundCircle",
    "SnowflakePower",
    "SubdivisionTree",
    "arc_diameter",
    "assouad_upper",
    "brute_force_distance",
    "build_4adic",
    "build_theorem_a",
    "build_theorem_b",
    "distance",
    "doubling_test",
    "equal_diameter_split",
    "extend_to_dyadic",
    "image_bracket",
    "map_point",
    "validate",
]
