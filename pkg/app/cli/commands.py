"""Command-line surface: analyze, price, curve and validate a DistributionSpec.

JSON and CSV go to stdout or ``--out``; diagnostics go to stderr. The exit
status is the ``exit_code`` of the library error that stopped the command.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from app.config import settings
from app.core import classify, mc_oracle, pricing, reliability
from app.core.errors import DemandModelError, MissingDensityError, NoFiniteMaximizerError, ValidationFailedError
from app.logging.logging_config import cli_logger
from app.logging.logging_decorator import log_function_call
from app.models.model_pydantic import NumericConfig, json_number
from app.schema.schema import load_spec


def _config(args) -> NumericConfig:
    overrides = list(args.set or [])
    if args.grid is not None:
        overrides.append(f"grid_points={args.grid}")
    return NumericConfig().with_overrides(overrides)


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text, encoding="utf-8")
        cli_logger.info(f"wrote {out}")
    else:
        sys.stdout.write(text)


def _dump(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


@log_function_call(cli_logger)
def cmd_analyze(args) -> int:
    dist = load_spec(args.spec)
    config = _config(args)
    with config.quadrature():
        report = classify.classify(dist, config)
        payload = report.to_json_dict()
        payload["label"] = dist.label
        payload["mean"] = dist.mean
        try:
            payload["second_moment"] = json_number(classify.moment(dist, 2.0, report, config))
        except DemandModelError as e:
            cli_logger.warning(f"second moment unavailable: {e}")
            payload["second_moment"] = "numerically divergent"
    _emit(_dump(payload), args.out)
    return 0


@log_function_call(cli_logger)
def cmd_price(args) -> int:
    dist = load_spec(args.spec)
    config = _config(args)
    with config.quadrature():
        if args.single_unit:
            single = pricing.solve_single_unit(dist, config)
            _emit(_dump(single.to_json_dict()), args.out)
            if single.optimal_price is None:
                raise NoFiniteMaximizerError(f"no-finite-maximizer: {single.certificate_reason}")
            return 0
        solution = pricing.solve(dist, config)
    _emit(_dump(solution.to_json_dict()), args.out)
    solution.require_optimum()
    return 0


@log_function_call(cli_logger)
def cmd_curve(args) -> int:
    dist = load_spec(args.spec)
    config = _config(args)
    if args.functions is None:
        functions = [name for name in reliability.CURVE_COLUMNS if dist.has_density or name not in ("h", "g")]
    else:
        functions = [name.strip() for name in args.functions.split(",") if name.strip()]
    if not dist.has_density and {"h", "g"} & set(functions):
        raise MissingDensityError(f"h and g need a density; {dist.label} has none")
    result = reliability.curves(dist, config)
    _emit(reliability.write_curves_csv(result, None, functions), args.out)
    return 0


@log_function_call(cli_logger)
def cmd_validate(args) -> int:
    dist = load_spec(args.spec)
    config = _config(args)
    n = args.n if args.n is not None else settings.DEFAULT_MC_SAMPLES
    seed = args.seed if args.seed is not None else settings.DEFAULT_SEED
    results = mc_oracle.validation_suite(dist, n, seed, config)
    _emit("".join(r.to_json_line() + "\n" for r in results), args.out)
    failed = [r for r in results if not r.passed]
    if failed:
        raise ValidationFailedError(f"{len(failed)} of {len(results)} checks failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("spec", help="Path to a DistributionSpec JSON file")
    common.add_argument("--out", type=str, help="Write output to this file instead of stdout")
    common.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="Override a numeric setting, e.g. --set mono_slack=1e-6 (repeatable)",
    )
    common.add_argument("--grid", type=int, metavar="N", help="Grid points (same as --set grid_points=N)")
    common.add_argument("--seed", type=int, help="Monte-Carlo seed")
    common.add_argument("--n", type=int, help="Monte-Carlo sample count")

    parser = argparse.ArgumentParser(
        prog="demandmrd",
        description="Mean residual demand, elasticity classes and fixed-point pricing",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Classify a distribution (IFR / DMRD / IGFR / DGMRD, tail limits)
  python main.py analyze specs/bs-6-5.json

  # Optimal price and certificate
  python main.py price specs/pareto-1-3.json

  # GMRD curve as CSV
  python main.py curve specs/mixture-25.json --functions l --out mixture-25.csv

  # Monte-Carlo cross-check
  python main.py validate specs/uniform.json --n 1000000 --seed 7
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", parents=[common], help="Classification report as JSON")
    analyze.set_defaults(handler=cmd_analyze)

    price = sub.add_parser("price", parents=[common], help="Optimal price as JSON")
    price.add_argument("--single-unit", action="store_true", help="Reservation-price model instead of linear demand")
    price.set_defaults(handler=cmd_price)

    curve = sub.add_parser("curve", parents=[common], help="Reliability curves as CSV")
    curve.add_argument(
        "--functions", type=str,
        help="Comma-separated subset of m,l,h,g,eps,R (default: all available)",
    )
    curve.set_defaults(handler=cmd_curve)

    validate = sub.add_parser("validate", parents=[common], help="Monte-Carlo checks as JSON lines")
    validate.set_defaults(handler=cmd_validate)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except DemandModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


def main():
    sys.exit(run())
