"""Command-line interface.

Subcommands:

* ``verify``       run check suites on a configuration, print the table,
                   optionally write the JSON report
* ``eval``         print any named tensor or scalar at one fiber point
* ``scan-defect``  discrepancy-versus-defect study along a scale ladder

Exit codes: 0 all checks passed, 1 a required tolerance failed,
2 configuration or domain error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .change import RegularityError, barred_metric_inverse
from .delta import delta_ingredients, delta_tensors, ingredient_values
from .harness import (
    SamplingError,
    dumps_17,
    load_config_file,
    run_defect_scan,
    run_verify,
)
from .jets import EvaluationDomainError, FiberPoint
from .linalg import SingularMetricError, values
from .metrics import ConfigError, h_vector_defect, metric_field


def _quantities():
    """Registry: quantity name -> function of a change frame."""

    def base(attr):
        return lambda cf: getattr(cf.base, attr)

    def conn(attr):
        return lambda cf: getattr(cf.frame.connection_values, attr)

    def barred(attr):
        return lambda cf: getattr(cf.barred, attr)

    def hdata(attr):
        return lambda cf: getattr(cf.hdata, attr)

    def scal(attr):
        return lambda cf: getattr(cf.scalars, attr)

    reg = {
        "L": base("L"),
        "l": base("l"),
        "g": base("g"),
        "g_inv": base("g_inv"),
        "h": base("h"),
        "C": base("C"),
        "C_mixed": base("C_mixed"),
        "gamma": conn("gamma"),
        "G": conn("G"),
        "N": conn("N"),
        "F": conn("F"),
        "G_berwald": conn("G_berwald"),
        "b": hdata("b"),
        "beta": hdata("beta"),
        "s": hdata("s"),
        "tau": hdata("tau"),
        "m": hdata("m"),
        "m2": hdata("m2"),
        "b2": hdata("b2"),
        "rho": hdata("rho"),
        "defect": lambda cf: h_vector_defect(cf.base_field, cf.hdata, cf.p),
        "L_bar": barred("L_bar"),
        "l_bar": barred("l_bar"),
        "h_bar": barred("h_bar"),
        "g_bar": barred("g_bar"),
        "g_bar_inv": barred("g_bar_inv"),
        "g_bar_inv_published": lambda cf: barred_metric_inverse(
            cf.base, cf.hdata, cf.scalars, "published"
        ),
        "C_bar": barred("C_bar"),
        "C_bar_mixed": barred("C_bar_mixed"),
        "V": barred("V"),
        "M": barred("M"),
        "b_cov_deriv": lambda cf: values(
            ingredient_values(delta_ingredients(cf)).b_cov
        ),
        "D_i": lambda cf: delta_tensors(cf).D_i,
        "D_ij": lambda cf: delta_tensors(cf).D_ij,
        "D_ijk": lambda cf: delta_tensors(cf).D_ijk,
        "G_bar": lambda cf: delta_tensors(cf).barred_G,
        "N_bar": lambda cf: delta_tensors(cf).barred_N,
        "F_bar": lambda cf: delta_tensors(cf).barred_F,
        "G_berwald_bar": lambda cf: delta_tensors(cf).barred_G_berwald,
    }
    for name in ("p", "p1", "p2", "p3", "q", "q1", "q2", "q3", "K1", "K2", "q1_solved"):
        reg[name] = scal(name)
    return reg


QUANTITIES = _quantities()


def _format_value(v) -> str:
    if isinstance(v, np.ndarray):
        flat = []

        def walk(a, idx):
            if a.ndim == 0:
                flat.append((idx, float(a)))
            else:
                for i in range(a.shape[0]):
                    walk(a[i], idx + (i,))

        walk(v, ())
        lines = []
        for idx, val in flat:
            label = "".join(f"[{i}]" for i in idx)
            lines.append(f"{label} {format(val, '.17g')}")
        return "\n".join(lines)
    return format(float(v), ".17g")


def _parse_coords(text: str, n: int, what: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"--{what} must be comma-separated numbers")
    if len(vals) != n:
        raise ConfigError(f"--{what} must have {n} components")
    return vals


def _cmd_verify(args) -> int:
    config = load_config_file(args.config)
    if args.seed is not None:
        config.sampling.seed = args.seed
    suites = None
    if args.suite:
        suites = tuple(s for spec in args.suite for s in spec.split(","))
    report = run_verify(config, suites)
    print(report.to_text())
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
            fh.write("\n")
    return report.exit_code


def _cmd_eval(args) -> int:
    config = load_config_file(args.config)
    x = _parse_coords(args.x, config.n, "x")
    y = _parse_coords(args.y, config.n, "y")
    if args.quantity not in QUANTITIES:
        known = ", ".join(sorted(QUANTITIES))
        raise ConfigError(f"unknown quantity {args.quantity!r}; known: {known}")
    from .change import ChangeFrame

    cf = ChangeFrame(metric_field(config.metric), config.h_vector, FiberPoint(x, y))
    print(_format_value(QUANTITIES[args.quantity](cf)))
    return 0


def _cmd_scan_defect(args) -> int:
    config = load_config_file(args.config)
    if args.seed is not None:
        config.sampling.seed = args.seed
    ladder = None
    if args.ladder:
        try:
            ladder = tuple(float(v) for v in args.ladder.split(","))
        except ValueError:
            raise ConfigError("--ladder must be comma-separated numbers")
    report = run_defect_scan(config, ladder)
    print(report.to_text())
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
            fh.write("\n")
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finslercalc",
        description="Verified tensor calculus for h-vector metric changes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--config", required=True, help="JSON configuration file")
    v.add_argument("--suite", action="append", help="suite name(s), comma separated")
    v.add_argument("--json", help="write the JSON report to this path")
    v.add_argument("--seed", type=int, help="override the sampling seed")
    v.set_defaults(fn=_cmd_verify)

    e = sub.add_parser("eval", help="print a named quantity at a point")
    e.add_argument("--config", required=True)
    e.add_argument("--x", required=True, help="comma-separated base coordinates")
    e.add_argument("--y", required=True, help="comma-separated fiber coordinates")
    e.add_argument("--quantity", required=True)
    e.set_defaults(fn=_cmd_eval)

    s = sub.add_parser("scan-defect", help="defect-versus-discrepancy study")
    s.add_argument("--config", required=True)
    s.add_argument("--ladder", help="comma-separated scale factors")
    s.add_argument("--json", help="write the JSON report to this path")
    s.add_argument("--seed", type=int, help="override the sampling seed")
    s.set_defaults(fn=_cmd_scan_defect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (
        ConfigError,
        SamplingError,
        EvaluationDomainError,
        RegularityError,
        SingularMetricError,
        FileNotFoundError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
