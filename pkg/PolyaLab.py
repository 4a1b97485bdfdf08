"""Command-line front end.

Global options come before the subcommand::

    python PolyaLab.py --format json sweep karlin --p 3 --exponents 0.5,1,2

Stored defaults are edited with ``config show`` and ``config set KEY VALUE``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from errors import DomainError, InconsistentInputError, PolyaLabError
from numerics_core import working_precision
from pf_densities import (
    HW,
    OmegaQR,
    Wallis,
    evaluate,
    hciz_density_cross_check,
    hciz_det,
    hciz_series,
    hw_eval_additive,
    hw_eval_determinantal,
    hw_eval_series,
    kernel_from_json,
)
from preserver_lab import (
    GRID_CLASSES,
    PowerSweepConfig,
    PreserverFamily,
    RecoveryResult,
    ShiftSearch,
    arithmetic_progression_power,
    falsify_preserver,
    gamma_sweep,
    hw_poly_rigidity,
    karlin_sweep,
    lambda_d_boundary,
    mbeta_power_test,
    recover_from_maclaurin,
    recover_from_moments,
    wallis_sweep,
)
from reports import (
    Document,
    eval_document,
    falsification_document,
    hciz_document,
    recovery_document,
    render,
    render_table,
    sample_document,
    settings_document,
    sweep_document,
    tn_document,
    witness_document,
)
from settings import OUTPUT_FORMATS, RunConfig, Settings
from symfunc import ParamVector, as_scalar
from tp_check import check_tn, check_tp, sample

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_USAGE = 2
LOG_LEVEL_ENV_VAR = "POLYALAB_LOG_LEVEL"
EXIT_CODES_HELP = """exit codes:
  0  success, or the tested property holds
  1  the property was refuted, or the input is inconsistent
  2  usage, domain or precondition error
"""


def _values(text: str) -> list[str]:
    """Comma-separated numbers; kept as strings so decimals stay exact."""
    items = [item.strip() for item in text.split(",")]
    if not all(items):
        raise argparse.ArgumentTypeError(f"Expected comma-separated numbers, got {text!r}")
    return items


def _add_grid_arguments(parser: argparse.ArgumentParser, required: bool = True):
    parser.add_argument("--xs", type=_values, required=required, help="row grid, e.g. 0,1,2")
    parser.add_argument("--ys", type=_values, required=required, help="column grid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyalab",
        description="Total-positivity experiments on Polya frequency functions.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--precision", type=int, help="working precision in bits (>= 64)")
    parser.add_argument("--tol", help="tolerance for series evaluation, e.g. 1e-12")
    parser.add_argument("--budget", type=int, help="cap on minors evaluated per search")
    parser.add_argument("--seed", type=int, help="seed for randomized grid batteries")
    parser.add_argument("--format", choices=OUTPUT_FORMATS, dest="output_format")
    parser.add_argument("--out", type=Path, help="write the report to this file")
    parser.add_argument("--settings", type=Path, help="settings file to read defaults from")
    commands = parser.add_subparsers(dest="command", required=True)

    eval_parser = commands.add_parser("eval", help="evaluate a kernel at points")
    eval_parser.add_argument("spec", help='kernel JSON, e.g. {"family":"Wallis"}')
    eval_parser.add_argument("--x", type=_values, action="append", required=True)
    eval_parser.add_argument(
        "--method",
        choices=("auto", "additive", "series", "determinantal"),
        default="auto",
        help="evaluator for HW kernels",
    )

    sample_parser = commands.add_parser("sample", help="print the matrix spec(x_i - y_j)")
    sample_parser.add_argument("spec")
    _add_grid_arguments(sample_parser)

    tn_parser = commands.add_parser("tncheck", help="TN_p or TP_p test of a sampled kernel")
    tn_parser.add_argument("spec")
    _add_grid_arguments(tn_parser)
    tn_parser.add_argument("--p", type=int, help="largest minor order (default: full)")
    tn_parser.add_argument("--tp", action="store_true", help="test strict positivity")
    tn_parser.add_argument("--fekete", action="store_true", help="contiguous minors only")

    sweep_parser = commands.add_parser("sweep", help="power or parameter sweeps")
    sweep_parser.add_argument("kind", choices=("karlin", "wallis", "gamma", "lambda-d"))
    sweep_parser.add_argument("--p", type=int, required=True)
    sweep_parser.add_argument("--exponents", type=_values, help="exponents to classify")
    sweep_parser.add_argument("--ds", type=_values, help="values of d for lambda-d")
    sweep_parser.add_argument("--q", default="1", help="OmegaQR q (karlin)")
    sweep_parser.add_argument("--r", default="1", help="OmegaQR r (karlin)")
    sweep_parser.add_argument("--shift-lower")
    sweep_parser.add_argument("--shift-upper")
    _add_grid_arguments(sweep_parser, required=False)

    recover_parser = commands.add_parser("recover", help="parameters from moments or derivatives")
    recover_parser.add_argument("mode", choices=("moments", "maclaurin"))
    recover_parser.add_argument("--data", type=_values, required=True)
    recover_parser.add_argument("--m", type=int, required=True)

    hciz_parser = commands.add_parser("hciz", help="rank-one HCIZ integral checks")
    hciz_parser.add_argument("mode", choices=("det", "series", "density"))
    hciz_parser.add_argument("--a", type=_values, required=True)
    hciz_parser.add_argument("--b", type=_values, help="second spectrum (det)")
    hciz_parser.add_argument("--x", help="argument (series)")
    hciz_parser.add_argument("--n", type=int, default=200, help="series terms")
    hciz_parser.add_argument("--t", help="t > 0 (density)")

    falsify_parser = commands.add_parser("falsify", help="search for preserver counterexamples")
    falsify_parser.add_argument(
        "family", choices=("power", "constant", "indicator", "affine")
    )
    falsify_parser.add_argument("--params", type=_values, required=True)
    falsify_parser.add_argument("--grid-class", choices=GRID_CLASSES, default="TN-grid")
    falsify_parser.add_argument("--order", type=int, default=4)

    witness_parser = commands.add_parser("witness", help="fixed-kernel witness searches")
    witness_parser.add_argument("kind", choices=("mbeta", "rigidity", "ap-power"))
    witness_parser.add_argument("--alpha", type=_values, help="HW parameters")
    witness_parser.add_argument("--beta", default="1")
    witness_parser.add_argument("--k", type=int, default=2, help="integer power")
    witness_parser.add_argument("--coeffs", type=_values, help="polynomial, lowest degree first")
    witness_parser.add_argument("--p", type=int, default=4, help="order")

    config_parser = commands.add_parser("config", help="show or change stored defaults")
    config_actions = config_parser.add_subparsers(dest="action", required=True)
    config_actions.add_parser("show", help="print the effective settings")
    set_parser = config_actions.add_parser("set", help="validate and store one setting")
    set_parser.add_argument("key")
    set_parser.add_argument("value", help="JSON literal or plain text; grid_steps takes a list")
    return parser


def _settings(args) -> Settings:
    return Settings(args.settings) if args.settings else Settings()


def _require(value: Any, flag: str, command: str):
    if value is None:
        raise PolyaLabError(f"{command} needs {flag}")
    return value


def _cmd_eval(args, config: RunConfig) -> tuple[Document, int]:
    spec = kernel_from_json(args.spec)
    points = [as_scalar(x) for group in args.x for x in group]
    if args.method != "auto" and not isinstance(spec, HW):
        raise PolyaLabError(f"--method {args.method} only applies to HW kernels")
    results = []
    for x in points:
        if args.method == "additive":
            result = hw_eval_additive(spec.params, x)
        elif args.method == "series":
            result = hw_eval_series(spec.params, x, config.tolerance_value)
        elif args.method == "determinantal":
            result = hw_eval_determinantal(spec.params, x)
        else:
            result = evaluate(spec, x)
        results.append((x, result))
    return eval_document(spec, results), EXIT_OK


def _cmd_sample(args, config: RunConfig) -> tuple[Document, int]:
    return sample_document(sample(kernel_from_json(args.spec), args.xs, args.ys)), EXIT_OK


def _cmd_tncheck(args, config: RunConfig) -> tuple[Document, int]:
    g = sample(kernel_from_json(args.spec), args.xs, args.ys)
    if args.tp or args.fekete:
        report = check_tp(g, args.p, use_fekete=args.fekete, budget=config.budget)
    else:
        report = check_tn(g, args.p, budget=config.budget)
    return tn_document(report, g), EXIT_OK if report.holds else EXIT_REFUTED


def _cmd_sweep(args, config: RunConfig) -> tuple[Document, int]:
    search = ShiftSearch(
        lower=None if args.shift_lower is None else as_scalar(args.shift_lower),
        upper=None if args.shift_upper is None else as_scalar(args.shift_upper),
        points=config.shift_points,
        refinement_depth=config.refinement_depth,
    )
    if args.kind == "lambda-d":
        ds = _require(args.ds, "--ds", "sweep lambda-d")
        report = lambda_d_boundary(ds, args.p, args.xs, args.ys, budget=config.budget)
        return sweep_document(report), EXIT_OK
    exponents = _require(args.exponents, "--exponents", f"sweep {args.kind}")
    if args.kind == "gamma":
        report = gamma_sweep(
            exponents, args.p, args.xs, args.ys, search, config.budget, config.grid_steps
        )
        return sweep_document(report), EXIT_OK
    base = OmegaQR(args.q, args.r) if args.kind == "karlin" else Wallis()
    cfg = PowerSweepConfig(
        base=base,
        exponents=tuple(exponents),
        p=args.p,
        xs=args.xs,
        ys=args.ys,
        shift_search=search,
        budget=config.budget,
        grid_steps=config.grid_steps,
    )
    report = karlin_sweep(cfg) if args.kind == "karlin" else wallis_sweep(cfg)
    return sweep_document(report), EXIT_OK


def _cmd_recover(args, config: RunConfig) -> tuple[Document, int]:
    if args.mode == "moments":
        result = recover_from_moments(args.data, args.m)
    else:
        result = recover_from_maclaurin(args.data, args.m)
    return recovery_document(result, args.mode), EXIT_OK


def _cmd_hciz(args, config: RunConfig) -> tuple[Document, int]:
    if args.mode == "det":
        result = hciz_det(args.a, _require(args.b, "--b", "hciz det"))
        return hciz_document("det", [("hciz_det", result)]), EXIT_OK
    if args.mode == "series":
        result = hciz_series(args.a, _require(args.x, "--x", "hciz series"), args.n)
        return hciz_document("series", [("hciz_series", result)]), EXIT_OK
    lhs, rhs = hciz_density_cross_check(args.a, _require(args.t, "--t", "hciz density"))
    return hciz_document("density", [("series_side", lhs), ("density_side", rhs)]), EXIT_OK


def _cmd_falsify(args, config: RunConfig) -> tuple[Document, int]:
    family = PreserverFamily(args.family, tuple(args.params))
    result = falsify_preserver(
        family, args.grid_class, args.order, budget=config.budget, seed=config.seed
    )
    code = EXIT_REFUTED if result.status == "Counterexample" else EXIT_OK
    return falsification_document(result), code


def _cmd_witness(args, config: RunConfig) -> tuple[Document, int]:
    if args.kind == "mbeta":
        result = mbeta_power_test(args.beta, args.k, args.p, config.grid_steps, config.budget)
        code = EXIT_REFUTED if result.status == "NegativeMinor" else EXIT_OK
        return witness_document(result, "mbeta"), code
    params = ParamVector(tuple(_require(args.alpha, "--alpha", f"witness {args.kind}")))
    if args.kind == "rigidity":
        coeffs = _require(args.coeffs, "--coeffs", "witness rigidity")
        result = hw_poly_rigidity(
            params,
            coeffs,
            args.p,
            grid_steps=config.grid_steps,
            budget=config.budget,
            seed=config.seed,
        )
        code = EXIT_REFUTED if result.status == "NegativeMinor" else EXIT_OK
        return witness_document(result, "rigidity"), code
    recovered, verification, residual = arithmetic_progression_power(params, args.k, args.p)
    document = recovery_document(RecoveryResult(recovered, residual), "ap-power")
    document.payload["verification"] = tn_document(verification).payload["report"]
    return document, EXIT_OK if verification.holds else EXIT_REFUTED


def _setting_value(key: str, text: str) -> Any:
    if key == "grid_steps":
        return _values(text)
    try:
        return json.loads(text)
    except ValueError:
        return text


def _cmd_config(args, config: RunConfig) -> tuple[Document, int]:
    settings = _settings(args)
    if args.action == "set":
        try:
            value = _setting_value(args.key, args.value)
        except argparse.ArgumentTypeError as exc:
            raise DomainError(str(exc)) from exc
        settings.set(args.key, value)
        LOGGER.info("Stored %s in %s", args.key, settings.settings_file)
    return settings_document(settings.data, str(settings.settings_file)), EXIT_OK


COMMANDS = {
    "eval": _cmd_eval,
    "sample": _cmd_sample,
    "tncheck": _cmd_tncheck,
    "sweep": _cmd_sweep,
    "recover": _cmd_recover,
    "hciz": _cmd_hciz,
    "falsify": _cmd_falsify,
    "witness": _cmd_witness,
    "config": _cmd_config,
}


def _emit(document: Document, config: RunConfig, out: Path | None):
    text = render(document, config.output_format)
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    LOGGER.info("Wrote %s report to %s", config.output_format, out)
    sys.stdout.write(render_table(document))


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        config = RunConfig.from_sources(
            _settings(args),
            precision_bits=args.precision,
            tolerance=args.tol,
            output_format=args.output_format,
            seed=args.seed,
            budget=args.budget,
        )
        with working_precision(config.precision_bits):
            document, code = COMMANDS[args.command](args, config)
            _emit(document, config, args.out)
    except InconsistentInputError as exc:
        print(f"polyalab: inconsistent input: {exc}", file=sys.stderr)
        return EXIT_REFUTED
    except PolyaLabError as exc:
        print(f"polyalab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        LOGGER.exception("I/O failure")
        print(f"polyalab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return code


def run():
    log_level_name = os.environ.get(LOG_LEVEL_ENV_VAR, "WARNING").upper()
    log_level = getattr(logging, log_level_name, logging.WARNING)
    logging.basicConfig(
        level=log_level, format="%(asctime)s [%(levelname)s] %(name)s: %(message)s"
    )
    sys.exit(main())


if __name__ == "__main__":
    run()
