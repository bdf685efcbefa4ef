"""Command-line interface: ``snowcircles <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import builders, rohde, verify
from . import model_metric as mm
from .curves import MetricCurve, ModelCircle, curve_from_dict
from .diameter import (
    NAMED_RULES,
    ChoiceSource,
    DiameterFunction,
    assouad_upper,
    doubling_test,
    materialize,
    validate,
)
from .dyadic import CirclePoint, DyadicArc, GeneralArc, format_number, parse_number
from .errors import DomainError, SnowError, UnboundedError

CURVE_KINDS = {"round_circle", "polyline", "model_circle", "snowflake_power"}


class UsageError(SnowError, ValueError):
    code = "usage_error"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _jsonable(x: Any) -> Any:
    if isinstance(x, Fraction):
        return format_number(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _finite(x: Any) -> Any:
    """Replace non-finite floats by null so the output stays strict JSON."""
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def dumps(data: Any) -> str:
    return json.dumps(_finite(data), sort_keys=True, default=_jsonable, allow_nan=False) + "\n"


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)  # mkstemp creates files private to the owner
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(args: argparse.Namespace, data: Any, summary: str) -> None:
    if args.output:
        write_atomic(args.output, dumps(data))
        print(summary)
    else:
        sys.stdout.write(dumps(data))
        print(summary, file=sys.stderr)


def _read_json(path: str) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not valid JSON: {exc}") from exc


def load_model(path: str) -> DiameterFunction:
    return DiameterFunction.from_dict(_read_json(path))


def load_metric(path: str) -> DiameterFunction | MetricCurve:
    data = _read_json(path)
    if data.get("kind") in CURVE_KINDS:
        return curve_from_dict(data)
    return DiameterFunction.from_dict(data)


def load_curve_arg(path: str) -> MetricCurve:
    data = _read_json(path)
    if data.get("kind") in CURVE_KINDS:
        return curve_from_dict(data)
    return ModelCircle(DiameterFunction.from_dict(data))


def _bracket_dict(b: mm.MetricBracket) -> dict[str, Any]:
    return b.to_dict()


# --- subcommands ----------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> None:
    params: dict[str, Any] = {}
    if args.rule == "random_bernoulli":
        params["p_snow"] = args.p_snow
    if args.rule == "alternating":
        params["phase"] = args.phase
    choices = ChoiceSource.named(args.rule, seed=args.seed, **params)
    df = DiameterFunction(parse_number(args.sigma), choices, args.m, args.horizon)
    if args.materialize:
        df = materialize(df, args.depth)
    report = validate(df, args.depth)
    _emit(args, df.to_dict(), f"model sigma={args.sigma} rule={args.rule} m={args.m} valid={report.valid}")


def cmd_dist(args: argparse.Namespace) -> None:
    df = load_model(args.model)
    b = mm.distance(df, CirclePoint.parse(args.x), CirclePoint.parse(args.y), args.depth)
    _emit(args, _bracket_dict(b), f"d({args.x}, {args.y}) in [{float(b.lower):.12g}, {float(b.upper):.12g}]")


def cmd_arc_diam(args: argparse.Namespace) -> None:
    df = load_model(args.model)
    if args.arc:
        arc: Any = DyadicArc.parse(args.arc)
    elif args.start is not None and args.end is not None:
        arc = GeneralArc.parse(args.start, args.end)
    else:
        raise UsageError("give --arc n:k or both --start and --end")
    b = mm.arc_diameter(df, arc, args.depth)
    _emit(args, _bracket_dict(b), f"diam in [{float(b.lower):.12g}, {float(b.upper):.12g}]")


def _build_summary(r: builders.BuildResult) -> str:
    consts = " ".join(f"{k}={format_number(v) if isinstance(v, Fraction) else v}" for k, v in sorted(r.constants.items()))
    return f"{r.kind} depth={r.tree.depth} arcs={len(r.sandwich_log)} {consts}"


def cmd_build_a(args: argparse.Namespace) -> None:
    r = builders.build_theorem_a(load_curve_arg(args.curve), args.depth, args.tol)
    _emit(args, r.to_dict(), _build_summary(r))


def cmd_build_b(args: argparse.Namespace) -> None:
    r = builders.build_theorem_b(
        load_curve_arg(args.curve), parse_number(args.sigma), args.m, args.depth, args.tol, args.alpha, args.seed
    )
    _emit(args, r.to_dict(), _build_summary(r))


def cmd_build_4adic(args: argparse.Namespace) -> None:
    r = builders.build_4adic(
        load_curve_arg(args.curve), parse_number(args.p), args.depth, args.m, args.tol, args.alpha, args.seed
    )
    _emit(args, r.to_dict(), _build_summary(r))


def cmd_map_point(args: argparse.Namespace) -> None:
    r = builders.BuildResult.load(args.build)
    image = builders.map_point(r, args.s, args.tol)
    out = {"s": args.s, "image": format_number(image)}
    _emit(args, out, f"phi({args.s}) = {format_number(image)}")


def cmd_rohde(args: argparse.Namespace) -> None:
    p = parse_number(args.p)
    if args.choices in NAMED_RULES:
        params = {"p_snow": args.p_snow} if args.choices == "random_bernoulli" else {}
        choices: Any = ChoiceSource.named(args.choices, seed=args.seed, **params)
    else:
        choices = load_model(args.choices)
    polys = rohde.generate(p, choices, args.levels)
    shown = polys if args.all_levels else polys[-1:]
    final = polys[-1]
    worst = max(rohde.check_diameters(q) for q in polys)
    envelope = [rohde.triangles(a, p, b) for a, b in zip(polys, polys[1:])]
    nested = all(e.nested for e in envelope)
    separated = all(e.separated for e in envelope)
    summary = (
        f"rohde p={args.p} levels={args.levels} edges={final.vertices.size} "
        f"diameter_gap={worst:.3g} nested={nested} separated={separated}"
    )
    if args.output and args.output.endswith(".svg"):
        write_atomic(args.output, rohde.export_svg(shown, args.overlay, p))
        print(summary)
        return
    data = [q.to_dict() for q in shown]
    _emit(args, data[0] if len(data) == 1 else data, summary)


def cmd_verify_bilip(args: argparse.Namespace) -> None:
    if args.build:
        r = builders.BuildResult.load(args.build)
        rep = verify.build_distortion(r, args.pairs, args.seed)
    elif args.a and args.b:
        rep = verify.bilip_report(
            load_metric(args.a), load_metric(args.b), None, args.pairs, args.seed, args.bound, depth=args.depth
        )
    else:
        raise UsageError("give a build file, or both --a and --b")
    _emit(args, rep.to_dict(), f"L_est={rep.L_est:.6g} pairs={rep.pairs} violations={rep.violations}")


def cmd_analyze(args: argparse.Namespace) -> None:
    metric = load_metric(args.input)
    est = verify.assouad_estimate(metric, args.samples, args.seed, args.level)
    out: dict[str, Any] = {"assouad_estimate": est.to_dict()}
    upper: float | None = None
    if isinstance(metric, DiameterFunction):
        try:
            upper = assouad_upper(metric)
        except UnboundedError:
            upper = None
        out["assouad_upper"] = upper
        out["validation"] = validate(metric, args.depth).to_dict()
    _emit(args, out, f"alpha_est={est.alpha:.4g} upper={upper if upper is None else f'{upper:.6g}'}")


def cmd_doubling(args: argparse.Namespace) -> None:
    df = load_model(args.model)
    res = doubling_test(df, args.horizon)
    _emit(args, res.to_dict(), f"{res.status} n0={res.n0} N={res.N}")


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snowcircles", description="Snowflake metric circles and their bi-Lipschitz models.")
    parser.add_argument("--seed", type=int, default=0, help="single source of all randomness")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, fn: Callable[[argparse.Namespace], None], help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("-o", "--output", help="write the artifact here (atomically)")
        p.set_defaults(func=fn)
        return p

    p = add("gen", cmd_gen, "generate a model file")
    p.add_argument("--sigma", required=True)
    p.add_argument("--rule", choices=sorted(NAMED_RULES), default="all_snow")
    p.add_argument("--m", type=int, default=1, help="base exponent (2^m-adic grid)")
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--p-snow", type=float, default=0.5)
    p.add_argument("--phase", type=int, default=0)
    p.add_argument("--materialize", action="store_true", help="store explicit bit strings to --depth")

    p = add("dist", cmd_dist, "distance bracket between two points")
    p.add_argument("model")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--depth", type=int, default=16)

    p = add("arc-diam", cmd_arc_diam, "diameter bracket of an arc")
    p.add_argument("model")
    p.add_argument("--arc", help="dyadic arc n:k")
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--depth", type=int, default=16)

    p = add("build-a", cmd_build_a, "binary model of a curve (doubling or not)")
    p.add_argument("curve")
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-9)

    for name, fn, flag in (("build-b", cmd_build_b, "--sigma"), ("build-4adic", cmd_build_4adic, "--p")):
        p = add(name, fn, "M-ary model of a doubling curve" if name == "build-b" else "4-adic model of a curve")
        p.add_argument("curve")
        p.add_argument(flag, required=True)
        p.add_argument("--m", type=int, default=None)
        p.add_argument("--depth", type=int, default=4 if name == "build-b" else 3)
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--alpha", type=float, default=None)

    p = add("map-point", cmd_map_point, "image of a point under a built correspondence")
    p.add_argument("build")
    p.add_argument("s")
    p.add_argument("--tol", type=float, default=1e-6)

    p = add("rohde", cmd_rohde, "planar snowflake polygons (SVG or JSON)")
    p.add_argument("--p", required=True)
    p.add_argument("--choices", default="all_snow", help="named rule or 4-adic model file")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--p-snow", type=float, default=0.5)
    p.add_argument("--overlay", action="store_true", help="draw the triangle envelopes")
    p.add_argument("--all-levels", action="store_true", help="emit every level, not only the last")

    p = add("verify-bilip", cmd_verify_bilip, "empirical bi-Lipschitz distortion")
    p.add_argument("build", nargs="?")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--bound", type=float, default=None)
    p.add_argument("--depth", type=int, default=24)

    p = add("analyze", cmd_analyze, "Assouad estimate and validation")
    p.add_argument("input")
    p.add_argument("--samples", type=int, default=2)
    p.add_argument("--level", type=int, default=12)
    p.add_argument("--depth", type=int, default=12)

    p = add("doubling", cmd_doubling, "doubling classification of a model")
    p.add_argument("model")
    p.add_argument("--horizon", type=int, default=64)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
        return 0
    except SnowError as exc:
        print(dumps({"error": exc.code, "message": str(exc)}), end="")
        return 2
    except (OSError, ValueError) as exc:
        print(dumps({"error": "failure", "message": str(exc)}), end="")
        return 1


if __name__ == "__main__":
    sys.exit(main())
