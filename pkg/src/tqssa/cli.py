"""Command-line entry point: ``tqssa {validate,report,simulate,compare,project}``.

MODEL arguments are file paths; a bare name such as ``g2m_two_protein`` that
is not an existing file falls back to the models bundled with the package.

Exit codes: 0 success, 1 model fails validation (or compare fails its
tolerance), 2 unreadable or malformed input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import matops
from .fullsim import IntegratorConfig, integrate_full
from .integrate import IntegrationError
from .netmodel import NetworkSpec, ParseError, bundled_models, bundled_path, parse_network, validate_network
from .reduction import ProjectionError, integrate_reduced, project_initial
from .validity import RATIO_BOUND, compare_trajectories, epsilon_report

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3

NUMERIC_ERRORS = (matops.SingularMatrixError, matops.ConvergenceError,
                  ProjectionError, IntegrationError, FloatingPointError)


class _Invalid(Exception):
    pass


def _resolve(model: str) -> Path:
    path = Path(model)
    if path.exists() or model not in bundled_models():
        return path
    return bundled_path(model)


def _read(model: str) -> tuple[NetworkSpec, list]:
    try:
        raw = _resolve(model).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {model}: {exc.strerror or exc}") from None
    spec = parse_network(raw, check=False)
    return spec, validate_network(spec)


def _load(model: str) -> NetworkSpec:
    spec, diags = _read(model)
    errors = [d for d in diags if d.level == "error"]
    if errors:
        raise _Invalid("\n".join(str(d) for d in errors))
    return spec


def _config(args, t_end: float | None = None) -> IntegratorConfig:
    try:
        return IntegratorConfig(rtol=args.rtol, atol=args.atol,
                                t_end=args.t_end if t_end is None else t_end,
                                dt_out=args.dt_out, max_steps=args.max_steps)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def cmd_validate(args) -> int:
    _, diags = _read(args.model)
    for d in diags:
        print(d)
    n_err = sum(d.level == "error" for d in diags)
    n_warn = sum(d.level == "warning" for d in diags)
    print(f"{'invalid' if n_err else 'ok'}: {n_err} error(s), {n_warn} warning(s)")
    return EXIT_INVALID if n_err else EXIT_OK


def cmd_report(args) -> int:
    spec = _load(args.model)
    if args.at is not None and len(args.at) != spec.n:
        raise ParseError(f"--at needs {spec.n} values, got {len(args.at)}")
    report = epsilon_report(spec, args.at, ratio_bound=args.ratio_bound)
    print(report.to_json())
    return EXIT_OK


def _simulate_one(spec, mode, config, with_complexes):
    if mode == "full":
        return integrate_full(spec, config)
    return integrate_reduced(spec, config, with_complexes=with_complexes)


def cmd_simulate(args) -> int:
    spec = _load(args.model)
    config = _config(args)
    if args.mode == "both":
        if args.out is None:
            raise ParseError("--mode both needs --out (files STEM_full.csv and STEM_reduced.csv)")
        out = Path(args.out)
        stem = out.with_suffix("") if out.suffix == ".csv" else out
        for mode in ("full", "reduced"):
            table = _simulate_one(spec, mode, config, args.with_complexes)
            table.write_csv(f"{stem}_{mode}.csv")
        return EXIT_OK
    table = _simulate_one(spec, args.mode, config, args.with_complexes)
    if args.out is None:
        table.write_csv(sys.stdout)
    else:
        table.write_csv(args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _load(args.model)
    config = _config(args)
    transient = 0.05 * config.t_end if args.transient is None else args.transient
    full = integrate_full(spec, config)
    reduced = integrate_reduced(spec, config)
    summary = compare_trajectories(spec, full, reduced, transient=transient, tol=args.tol)
    print(summary.to_json())
    return EXIT_OK if summary.passed else EXIT_INVALID


def cmd_project(args) -> int:
    spec = _load(args.model)
    print(json.dumps(project_initial(spec).p_hat0.tolist()))
    return EXIT_OK


def _positive(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return x


def _nonneg(text: str) -> float:
    x = float(text)
    if not x >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tqssa",
        description="Full and reduced simulation of coupled Michaelis-Menten networks.")
    parser.add_argument("--rtol", type=_positive, default=1e-8, help="relative tolerance (default 1e-8)")
    parser.add_argument("--atol", type=_positive, default=1e-10, help="absolute tolerance (default 1e-10)")

    # tolerances may also follow the subcommand
    tol_flags = argparse.ArgumentParser(add_help=False)
    tol_flags.add_argument("--rtol", type=_positive, default=argparse.SUPPRESS)
    tol_flags.add_argument("--atol", type=_positive, default=argparse.SUPPRESS)
    tol_flags.add_argument("--max-steps", type=int, default=500_000,
                           help="integrator step budget per run (default 500000)")

    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("validate", help="check a model file and list diagnostics")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="print validity diagnostics as JSON")
    p.add_argument("model")
    p.add_argument("--at", type=_nonneg, nargs="+", metavar="P",
                   help="active levels for the spectrum (default: projected p0)")
    p.add_argument("--ratio-bound", type=_positive, default=RATIO_BOUND,
                   help="max/min ratio above which a rate group is flagged (default 100)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", parents=[tol_flags], help="integrate and write CSV")
    p.add_argument("model")
    p.add_argument("--mode", choices=("full", "reduced", "both"), default="both")
    p.add_argument("--t-end", type=_nonneg, default=10.0, help="final time (default 10)")
    p.add_argument("--dt-out", type=_positive, default=0.01, help="output spacing (default 0.01)")
    p.add_argument("--out", help="output CSV (stdout if omitted; a stem for --mode both)")
    p.add_argument("--with-complexes", action="store_true",
                   help="add manifold complexes to reduced output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[tol_flags], help="compare full and reduced runs")
    p.add_argument("model")
    p.add_argument("--t-end", type=_nonneg, default=10.0, help="final time (default 10)")
    p.add_argument("--dt-out", type=_positive, default=0.01, help="output spacing (default 0.01)")
    p.add_argument("--transient", type=_nonneg, default=None,
                   help="ignore t below this (default 0.05 * t-end)")
    p.add_argument("--tol", type=_nonneg, default=0.05,
                   help="pass threshold on the relative sup error (default 0.05)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("project", help="project p0 onto the slow manifold")
    p.add_argument("model")
    p.set_defaults(func=cmd_project)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Invalid as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERIC_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
