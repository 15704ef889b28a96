"""Command-line entry point.

musc-up run     --config cfg.json --out dir [--seed S] [--threads T]
musc-up compare --reports r1/report.json ... --reference ref/report.json --out dir
musc-up plot    --report dir/report.json --kind profile|field|bars --out prefix

Exit codes: 0 success, 2 the semi-intrusive error test rejected the
interpolation (artifacts still written, fallback estimate inside), 1 any
error. The MUSC_UP_THREADS environment variable sets the thread count when
--threads is not given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import EXIT_ERROR, ConfigError, load_config, run_experiment
from .coupling import NonFiniteStateError
from .pc import PCDivergenceError
from .report import compare_methods, plot_bars, plot_field, plot_profile

__all__ = ["build_parser", "main"]

THREADS_ENV = "MUSC_UP_THREADS"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="musc-up",
        description="Uncertainty propagation for time-scale-separated coupled models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("--config", required=True, help="JSON configuration file")
    p_run.add_argument("--out", required=True, help="output directory for the artifacts")
    p_run.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p_run.add_argument(
        "--threads", type=int, default=None,
        help=f"override the thread count (falls back to ${THREADS_ENV}, then the config)",
    )

    p_cmp = sub.add_parser("compare", help="score runs against a reference run")
    p_cmp.add_argument("--reports", nargs="+", required=True, help="report.json files to score")
    p_cmp.add_argument("--reference", required=True, help="report.json of the reference run")
    p_cmp.add_argument("--out", required=True, help="output directory for comparison files")

    p_plot = sub.add_parser("plot", help="emit plot data (CSV) and an SVG figure")
    p_plot.add_argument("--report", required=True, help="report.json of the run to plot")
    p_plot.add_argument("--kind", required=True, choices=["profile", "field", "bars"])
    p_plot.add_argument("--out", required=True, help="output path prefix (.csv/.svg appended)")
    p_plot.add_argument(
        "--slice-y", type=float, default=None,
        help="profile plots on 2D runs: take the grid row nearest this y",
    )
    p_plot.add_argument(
        "--quantity", choices=["mean", "std"], default="std",
        help="field plots: which field to draw (default std)",
    )
    p_plot.add_argument(
        "--species", choices=["u", "v"], default="u",
        help="field plots on two-species runs: which component (default u)",
    )
    return parser


def _resolve_threads(arg_value: int | None) -> int | None:
    if arg_value is not None:
        return arg_value
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return None
    try:
        n = int(env)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError([f"${THREADS_ENV}: must be a positive integer, got {env!r}"])
    return n


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    outcome = run_experiment(
        cfg, args.out, seed=args.seed, threads=_resolve_threads(args.threads)
    )
    decision = outcome.payload.get("decision")
    if decision is not None:
        print(f"error-test decision: {decision}")
    print(f"wrote {os.path.join(args.out, 'report.json')}")
    return outcome.exit_code


def _cmd_compare(args) -> int:
    payload = compare_methods(args.reports, args.reference, args.out)
    for entry in payload["entries"]:
        print(
            f"{entry['method']:>6s}: mean-rel-std-error "
            f"{entry['mean_rel_std_error']:.3e}, speedup x{entry['speedup_vs_reference']:.2f}"
        )
    print(f"wrote {os.path.join(args.out, 'comparison.json')}")
    return 0


def _cmd_plot(args) -> int:
    if args.kind == "profile":
        out = plot_profile(args.report, args.out, slice_y=args.slice_y)
    elif args.kind == "field":
        out = plot_field(args.report, args.out, quantity=args.quantity, species=args.species)
    else:
        out = plot_bars(args.report, args.out)
    print(f"wrote {out['csv']} and {out['svg']}")
    return 0


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "compare": _cmd_compare, "plot": _cmd_plot}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    except (NonFiniteStateError, PCDivergenceError) as exc:
        print(f"propagation aborted: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
