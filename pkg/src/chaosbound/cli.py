"""Command-line front end.

Exit codes: 0 success, 2 invalid input (schema, shape or JSON), 3 oracle
mismatch, 4 materialization or oracle cap exceeded, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import report
from .bounds import ALL_PROFILES, profile_skeleton, schema_profiles
from .builtins import BUILTIN_NAMES, Builtin, get_builtin
from .flattening import DEFAULT_ORACLE_CAP, OracleTooLarge, build_table, chaos_parameters, oracle_check
from .graph import Shape, ShapeError, graph_schema, norm_exponents, shape_from_json, sigma_bound_check
from .sampler import (
    CapExceeded,
    CoupledUnsupported,
    Mode,
    SampleConfig,
    monte_carlo,
    scaling_fit,
    spectral_norm,
    materialize,
)
from .schema import ChaosSchema, SchemaFormatError, schema_from_json, validate

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ORACLE = 3
EXIT_CAP = 4
EXIT_USAGE = 64

SEED_ENV = "CHAOSBOUND_SEED"


class UsageError(Exception):
    pass


class InvalidInput(Exception):
    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default, which we reserve for bad input
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# argument types


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _dims(text: str) -> dict[str, int]:
    out = {}
    for part in filter(None, (x.strip() for x in text.split(","))):
        name, sep, value = part.partition("=")
        if not sep or not name.strip():
            raise argparse.ArgumentTypeError(f"expected name=value, got {part!r}")
        try:
            out[name.strip()] = _positive_int(value)
        except argparse.ArgumentTypeError as exc:
            raise argparse.ArgumentTypeError(f"{name.strip()}: {exc}") from None
    return out


def _sizes(text: str) -> list[int]:
    return [_positive_int(x) for x in text.split(",") if x.strip()]


def _coupling(text: str) -> tuple[str, Fraction]:
    """``n=d^2`` couples n to the swept parameter with exponent 2."""
    name, sep, rhs = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=param^k, got {text!r}")
    base, _, power = rhs.partition("^")
    try:
        k = Fraction(power.strip().strip("{}")) if power else Fraction(1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad exponent in {text!r}") from None
    return name.strip(), (base.strip(), k)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "").strip()
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# --------------------------------------------------------------------------
# loading


def _load(args) -> Builtin:
    if args.builtin:
        return get_builtin(args.builtin)
    if not args.path:
        raise UsageError("give a schema or shape file, or --builtin NAME")
    try:
        with open(args.path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {args.path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInput([f"malformed JSON: {exc}"]) from None
    try:
        if isinstance(doc, dict) and "edges" in doc:
            return shape_from_json(doc, name=Path(args.path).stem)
        return schema_from_json(doc)
    except (SchemaFormatError, ShapeError) as exc:
        raise InvalidInput([str(exc)]) from None


def _checked_schema(obj: Builtin, n: int | str = "n") -> ChaosSchema:
    schema = graph_schema(obj, n) if isinstance(obj, Shape) else obj
    rep = validate(schema)
    if not rep.ok:
        raise InvalidInput(rep.violations)
    return schema


def _bind(schema: ChaosSchema, dims: dict[str, int] | None, need_numeric: bool) -> ChaosSchema:
    if dims:
        unknown = set(dims) - set(schema.symbols())
        if unknown:
            raise UsageError(f"--dims names {sorted(unknown)} are not dimensions of this schema {schema.symbols()}")
    missing = [s for s in schema.symbols() if s not in (dims or {})]
    if missing and need_numeric:
        raise UsageError(f"bind the symbolic dimensions {missing} with --dims, e.g. --dims {missing[0]}=4")
    bound = schema.bind(dims) if dims and not missing else schema
    if not bound.is_symbolic:
        rep = validate(bound)
        if not rep.ok:
            raise InvalidInput(rep.violations)
    return bound


def _out_dir(args) -> Path | None:
    if not getattr(args, "out", None):
        return None
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# --------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    obj = _load(args)
    schema = _checked_schema(obj)
    values = args.dims or None
    if values:
        _bind(schema, values, need_numeric=True)
    table = build_table(schema, values)
    cp = chaos_parameters(schema, values)
    order = schema.symbols()
    if args.format == "csv":
        sys.stdout.write(report.table_csv(table))
    else:
        title = f"flattenings ({args.builtin or args.path}; {schema.q} chaos coordinate{'s' if schema.q != 1 else ''})"
        sys.stdout.write(report.table_text(table, title))
        sys.stdout.write("\nparameters\n")
        sys.stdout.write(report.parameters_text(cp, order, symbolic=schema.is_symbolic))
        sys.stdout.write("\nbound profiles\n")
        if values or not schema.is_symbolic:
            _, profiles = schema_profiles(schema, values)
            sys.stdout.write(report.profiles_text(profiles))
        else:
            for th in ALL_PROFILES:
                sys.stdout.write(f"{th.value}: {profile_skeleton(th, schema.q).symbolic(cp, order)}\n")
    out = _out_dir(args)
    if out:
        (out / "table.csv").write_text(report.table_csv(table), encoding="utf-8")
        doc = {
            "schema": schema.to_json(),
            "dims": values or {},
            "parameters": {k: cp[k].render(order) for k in ("sigma", "v", "r")},
            "parameters_numeric": cp.numeric(),
        }
        (out / "analysis.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_graph(args) -> int:
    obj = _load(args)
    if not isinstance(obj, Shape):
        raise InvalidInput(["graph expects a shape (vertices, left, right, edges), got a schema"])
    rep = norm_exponents(obj)
    check = sigma_bound_check(obj)
    det = None
    if not obj.edges:
        n = max(args.n, len(obj.vertices))
        det = spectral_norm(materialize(graph_schema(obj, n), Mode.COUPLED, 0, 0))
        sys.stdout.write(report.graph_text(rep, check, det, n))
    else:
        sys.stdout.write(report.graph_text(rep, check))
    return EXIT_OK


def cmd_verify(args) -> int:
    obj = _load(args)
    schema = _bind(_checked_schema(obj), args.dims, need_numeric=True)
    try:
        rep = oracle_check(schema, cap=args.cap)
    except OracleTooLarge as exc:
        raise CapExceeded(str(exc)) from None
    upper = sum(r.mode == "upper" for r in rep.rows)
    for r in rep.rows:
        status = "ok" if r.passed else "FAIL"
        print(f"{status:4}  {r.assignment.cls.value:5}  {r.assignment.label():20}  formula {r.formula_sq:.12g}  explicit {r.explicit_sq:.12g}  ({r.mode})")
    if upper:
        print(f"upper-bound rows: {upper} (weighted schema, formula is an upper bound)")
    fails = rep.failures()
    out = _out_dir(args)
    if out:
        lines = ["class,placement,formula_sq,explicit_sq,mode,passed"]
        lines += [
            f"{r.assignment.cls.value},{' '.join(r.assignment.placement)},{r.formula_sq!r},{r.explicit_sq!r},{r.mode},{r.passed}"
            for r in rep.rows
        ]
        (out / "oracle.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if fails:
        for r in fails:
            print(
                f"oracle mismatch at {r.assignment.cls.value} flattening {r.assignment.label()}: "
                f"formula {r.formula_sq!r} vs explicit {r.explicit_sq!r}",
                file=sys.stderr,
            )
        print(f"{len(fails)} of {len(rep.rows)} flattenings disagree")
        return EXIT_ORACLE
    print(f"all {len(rep.rows)} flattenings agree")
    return EXIT_OK


def _sample_config(obj: Builtin, args, dims: dict[str, int] | None, n: int | None) -> SampleConfig:
    if isinstance(obj, Shape):
        schema = _checked_schema(obj, n)
        mode = Mode(args.mode or "coupled")
    else:
        schema = _bind(_checked_schema(obj), dims, need_numeric=True)
        mode = Mode(args.mode or "decoupled")
    return SampleConfig(
        schema,
        mode,
        trials=args.trials,
        seed=args.seed,
        unit_variance=args.unit_variance,
        workers=args.workers,
    )


def cmd_sample(args) -> int:
    obj = _load(args)
    config = _sample_config(obj, args, args.dims, args.n)
    rep = monte_carlo(config)
    csv_text = rep.to_csv()
    sys.stdout.write(csv_text)
    print(f"# mean {rep.mean_norm:.6g} stderr {rep.stderr:.3g} over {rep.trials} trials", file=sys.stderr)
    out = _out_dir(args)
    if out:
        (out / "samples.csv").write_text(csv_text, encoding="utf-8")
        (out / "summary.json").write_text(rep.to_json(), encoding="utf-8")
    return EXIT_OK


def _predicted_exponent(obj: Builtin, param: str, couple: dict[str, tuple[str, Fraction]]) -> Fraction:
    if isinstance(obj, Shape):
        return norm_exponents(obj).poly_exponent
    cp = chaos_parameters(obj)
    scale = {param: Fraction(1), **{name: k for name, (_, k) in couple.items()}}
    return max(
        (sum((e * scale.get(sym, Fraction(0)) for sym, e in m.powers), Fraction(0)) for m in cp.sigma.symbolic()),
        default=Fraction(0),
    )


def cmd_scaling(args) -> int:
    obj = _load(args)
    if len(args.sizes) < 3:
        raise UsageError("--sizes needs at least three values")
    if isinstance(obj, Shape):
        param, couple = "n", {}
    else:
        symbols = obj.symbols()
        if not symbols:
            raise UsageError("scaling needs a schema with symbolic dimensions")
        param = args.param or symbols[0]
        if param not in symbols:
            raise UsageError(f"--param {param!r} is not a dimension symbol of this schema {symbols}")
        couple = dict(args.couple or [])
        for name, (base, _) in couple.items():
            if name not in symbols or base != param:
                raise UsageError(f"--couple {name}={base}^k must couple a schema symbol to --param {param}")
    series = []
    for size in args.sizes:
        if isinstance(obj, Shape):
            config = _sample_config(obj, args, None, size)
        else:
            dims = dict(args.dims or {})
            dims[param] = size
            for name, (_, k) in couple.items():
                value = Fraction(size) ** k
                if value.denominator != 1:
                    raise UsageError(f"coupling {name}={param}^{k} gives a non-integer size at {param}={size}")
                dims[name] = int(value)
            config = _sample_config(obj, args, dims, None)
        series.append((size, monte_carlo(config)))
    fit = scaling_fit(series)
    predicted = _predicted_exponent(obj, param, couple)
    csv_text = fit.to_csv()
    sys.stdout.write(csv_text)
    lo, hi = fit.slope_ci
    print(f"slope {fit.slope:.4f} (±2se [{lo:.3f}, {hi:.3f}])  predicted {predicted} = {float(predicted):.4f}")
    out = _out_dir(args)
    if out:
        (out / "scaling.csv").write_text(csv_text, encoding="utf-8")
        doc = {
            "param": param,
            "sizes": args.sizes,
            "slope": fit.slope,
            "slope_stderr": fit.slope_stderr,
            "predicted": str(predicted),
            "reports": [r.summary() for _, r in series],
        }
        (out / "scaling.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chaosbound", description="Flattening norms, bound profiles and Monte Carlo for matrix chaoses.")
    sub = parser.add_subparsers(dest="command", required=True)

    def source(p):
        p.add_argument("path", nargs="?", help="schema or shape JSON file")
        p.add_argument("--builtin", choices=BUILTIN_NAMES, help="use a named example instead of a file")
        p.add_argument("--out", help="directory for CSV/JSON artifacts")

    p = sub.add_parser("analyze", help="flattening table, parameters and bound profiles")
    source(p)
    p.add_argument("--dims", type=_dims, help="numeric values for symbolic dimensions, e.g. d=3,n=4")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("graph", help="separator, exponents and edge ordering of a shape")
    source(p)
    p.add_argument("--n", type=_positive_int, default=5, help="n used to evaluate deterministic (edgeless) shapes")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("verify", help="compare closed-form flattening norms with explicit SVDs")
    source(p)
    p.add_argument("--dims", type=_dims)
    p.add_argument("--cap", type=_positive_int, default=DEFAULT_ORACLE_CAP, help="largest explicit flattening side")
    p.set_defaults(func=cmd_verify)

    def sampling(p):
        p.add_argument("--trials", type=_positive_int, default=10)
        p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
        p.add_argument("--mode", choices=[m.value for m in Mode])
        p.add_argument("--unit-variance", action="store_true", help="rescale entries to unit variance")
        p.add_argument("--workers", type=_positive_int, default=1)
        p.add_argument("--dims", type=_dims)

    p = sub.add_parser("sample", help="Monte Carlo spectral norms at fixed dimensions")
    source(p)
    sampling(p)
    p.add_argument("--n", type=_positive_int, default=16, help="n for shapes")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("scaling", help="log-log slope of the mean norm against a dimension")
    source(p)
    sampling(p)
    p.add_argument("--sizes", type=_sizes, required=True, help="comma-separated sizes, e.g. 8,16,32,64")
    p.add_argument("--param", help="swept dimension symbol (default: first symbol)")
    p.add_argument("--couple", type=_coupling, action="append", help="tie another symbol to the swept one, e.g. n=d^2")
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        if args.builtin and args.path:
            raise UsageError("give either a file or --builtin, not both")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"chaosbound: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidInput as exc:
        print(json.dumps({"violations": exc.violations}, indent=2))
        return EXIT_INVALID
    except CoupledUnsupported as exc:
        print(f"chaosbound: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceeded as exc:
        print(f"chaosbound: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
