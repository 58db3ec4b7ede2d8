"""Command-line entry point: ``twomodejc {simulate,optimize,figures,validate-config}``.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import config as cfg
from . import magnus
from .errors import NumericalError, ValidationError
from .figures import FIGURES, run_figure
from .optimize import grid_search_g2, magnus_optimum
from .output import write_json, write_trajectory
from .simulate import METHODS, run

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


class _Parser(argparse.ArgumentParser):
    # usage mistakes are validation errors; argparse's default code 2 means "numerical failure" here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twomodejc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--out", help="output directory (overrides output.path)")
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--tol", type=_positive_float, help="abs/rel tolerance for every integrator")
        p.add_argument("--threads", type=_positive_int)

    common(sub.add_parser("simulate", help="write one trajectory CSV"))
    p_opt = sub.add_parser("optimize", help="search g2 for W(T) = 0 and write a report")
    common(p_opt)
    p_opt.add_argument("--backend", choices=("semiclassical", "exact", "fluctuation", "magnus"))
    p_fig = sub.add_parser("figures", help="write the dataset bundle of one figure")
    p_fig.add_argument("figure", help=f"one of {', '.join(sorted(FIGURES))} or 'all'")
    p_fig.add_argument("--out", default="figures")
    p_fig.add_argument("--threads", type=_positive_int)
    common(sub.add_parser("validate-config", help="check a configuration file and exit"))
    return parser


def _out_dir(args, exp):
    return Path(args.out) if args.out else Path(exp.output_path)


def cmd_simulate(args) -> int:
    exp = cfg.load_config(args.config, args.method, args.tol)
    if exp.run is None:
        raise ValidationError("no run.method given", key="run.method")
    traj = run(exp.run)
    path = write_trajectory(traj, _out_dir(args, exp) / f"{exp.output_name}.csv")
    print(path)
    return EXIT_OK


def cmd_optimize(args) -> int:
    exp = cfg.load_config(args.config, None, args.tol)
    search = exp.search
    if search is None:
        raise ValidationError("no [optimize] block", key="optimize")
    if args.backend:
        search = dataclasses.replace(search, backend=args.backend)
    if args.threads:
        search = dataclasses.replace(search, threads=args.threads)
    report = {
        "backend": search.backend,
        "bracket": [search.g2_min, search.g2_max],
        "target_time": search.target_time,
    }
    if search.backend == "magnus":
        # analytic backend: closed-form optimum, residual from Magnus at the configured g1
        g = magnus_optimum(exp.params, exp.init)
        W, _, _ = magnus.bloch_evolve(exp.params.replace(g2=g), exp.init, search.target_time)
        report.update(g2_star=g, residual=abs(float(W)), evaluations=1, method="closed form")
    else:
        res = grid_search_g2(search, exp.params, exp.init)
        report.update(
            g2_star=res.g2_star,
            residual=res.residual,
            evaluations=res.evaluations,
            method="grid + bisection",
            grid_points=len(res.grid),
        )
    path = write_json(report, _out_dir(args, exp) / f"{exp.output_name}_optimize.json")
    print(f"g2* = {report['g2_star']:.10g}  |W(T)| = {report['residual']:.3e}  ({path})")
    return EXIT_OK


def cmd_figures(args) -> int:
    ids = sorted(FIGURES) if args.figure == "all" else [args.figure]  # run_figure validates ids
    for fig in ids:
        for path in run_figure(fig, Path(args.out), args.threads):
            print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    exp = cfg.load_config(args.config, args.method, args.tol)
    parts = []
    if exp.run:
        parts.append(f"run: {exp.run.method}, t_end={exp.run.t_end:.6g}, samples={exp.run.samples}")
    if exp.search:
        parts.append(f"optimize: {exp.search.backend} on [{exp.search.g2_min:.6g}, {exp.search.g2_max:.6g}]")
    print("ok" + ("; " + "; ".join(parts) if parts else ""))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "figures": cmd_figures,
    "validate-config": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
