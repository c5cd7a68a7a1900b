"""
Spline-Diff - command-line entry point

Derivative estimation from noisy, non-uniformly sampled signals with
penalized-likelihood splines, plus the benchmark harness comparing them to
sliding-mode and high-gain-observer differentiators.

Subcommands:
- estimate: CSV samples in, derivative estimates out (batch or online)
- simulate: write a noisy test-signal scenario as CSV
- bench: run the (h, sigma) x method x seed grid and write result files

Exit codes: 0 success, 1 usage/configuration, 2 data, 3 numerical failure.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from pydantic import ValidationError

import bench
import reporting
from exceptions import ConfigurationError, SplineDiffError
from schemas import ALL_METHODS, BenchRow, EstimatorConfig, ScenarioSpec
from settings import (
    DEFAULT_HGO_SAT, DEFAULT_HORIZON, DEFAULT_LAMBDA, DEFAULT_LEVANT_L, LOG_LEVEL, OUT_DIR, REFACTOR_EVERY,
    default_bench_config, load_bench_config,
)
from signal_lab import load_csv, benchmark_signal, save_csv, scenario_series, write_columns

logger = logging.getLogger(__name__)

USAGE_EXIT_CODE = 1


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT_CODE, f"{self.prog}: error: {message}\n")


def _method_from_args(args) -> str:
    if args.order is not None:
        return "spline2" if args.order == 1 else "spline0"
    return args.method


def _estimator_from_args(args) -> EstimatorConfig:
    try:
        return EstimatorConfig(
            method=_method_from_args(args),
            lam=args.lam,
            levant_L=args.levant_L,
            hgo_eps=args.hgo_eps,
            hgo_sat=args.hgo_sat,
            refactor_every=args.refactor_every,
            dense_per_interval=args.dense_per_interval,
            online=args.online,
        )
    except ValidationError as e:
        raise ConfigurationError(f"Invalid estimator settings: {e}") from e


# ============== Subcommands ==============

def cmd_estimate(args) -> int:
    series = load_csv(args.input)
    config = _estimator_from_args(args)
    logger.info(f"Estimating with {config.method} on {len(series)} samples from {args.input}")

    if config.online:
        z = bench.online_estimates(series, config)
    elif config.is_spline:
        model = bench.fit(series, config)
        z = bench.knot_derivatives(model)
        dense_path = args.dense_out or os.path.splitext(args.out)[0] + "_dense.csv"
        t_dense, z_dense = bench.dense_evaluation(model, config.dense_per_interval)
        write_columns(dense_path, ["t", "z"], [t_dense, z_dense])
        logger.info(f"Wrote dense evaluation to {dense_path}")
    else:
        z = bench.full_estimates(series, config)

    write_columns(args.out, ["t", "z"], [series.times, z])
    logger.info(f"Wrote {args.out}")
    return 0


def cmd_simulate(args) -> int:
    try:
        spec = ScenarioSpec(h=args.h, sigma=args.sigma, horizon=args.horizon, seed=args.seed)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid scenario: {e}") from e
    series = scenario_series(spec)
    save_csv(series, args.out)
    logger.info(f"Wrote {len(series)} samples (h={spec.h:g}, sigma={spec.sigma:g}, seed={spec.seed}) to {args.out}")
    if args.truth_out:
        x, z = benchmark_signal(series.times)
        write_columns(args.truth_out, ["t", "x", "z"], [series.times, x, z])
        logger.info(f"Wrote truth to {args.truth_out}")
    return 0


def _bench_overrides(args) -> dict:
    overrides = {
        "seeds": args.seeds,
        "base_seed": args.seed,
        "lam": args.lam,
        "lam_zero": args.lam_zero,
        "levant_L": args.levant_L,
        "hgo_eps": args.hgo_eps,
        "horizon": args.horizon,
        "workers": args.workers,
        "refactor_every": args.refactor_every,
        "methods": args.methods,
    }
    if args.online:
        overrides["scenarios"] = ["online"]
    elif args.full:
        overrides["scenarios"] = ["full"]
    if (args.h is None) != (args.sigma is None):
        raise ConfigurationError("--h and --sigma must be given together")
    if args.h is not None:
        overrides["rows"] = [BenchRow(h=args.h, sigma=args.sigma)]
    return overrides


def cmd_bench(args) -> int:
    overrides = _bench_overrides(args)
    if args.config:
        config = load_bench_config(args.config, **overrides)
    else:
        config = default_bench_config(**overrides)

    out_dir = args.out_dir or OUT_DIR
    results = bench.run_grid(config)
    reporting.write_results_csv(results, os.path.join(out_dir, "results.csv"))
    table_path = os.path.join(out_dir, "table.txt")
    reporting.write_table(results, config, table_path)

    if not args.no_plots:
        for row in config.rows:
            eps = next((r.hgo_eps for r in results if r.label == row.label and r.method == "hgo"), None)
            traces = bench.row_traces(config, row, eps)
            for path in reporting.write_plot_data(out_dir, row.label, traces):
                logger.info(f"Wrote {path}")

    with open(table_path) as fh:
        print(fh.read(), end="")
    return 0


# ============== Parser ==============

def _add_estimator_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lam", type=float, default=None, help=f"Penalty weight (default {DEFAULT_LAMBDA:g})")
    parser.add_argument("--levant-L", dest="levant_L", type=float, default=None, help=f"Levant constant L (default {DEFAULT_LEVANT_L:g})")
    parser.add_argument("--hgo-eps", dest="hgo_eps", type=float, default=None, help="HGO bandwidth parameter epsilon")
    parser.add_argument("--online", action="store_true", help="Endpoint-by-endpoint (online) estimation")
    parser.add_argument("--refactor-every", dest="refactor_every", type=int, default=None,
                        help="Refactorize the recursive solver every N updates (0 = never)")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="spline-diff", description="Spline-based derivative estimation and benchmark harness.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    est = sub.add_parser("estimate", help="Estimate derivatives from a (t, y) CSV file")
    est.add_argument("input", help="Input CSV with columns t, y")
    est.add_argument("--out", required=True, help="Output CSV with columns t, z")
    est.add_argument("--method", choices=ALL_METHODS, default="spline2")
    est.add_argument("--order", type=int, choices=[0, 1], default=None, help="Spline order (overrides --method)")
    est.add_argument("--hgo-sat", dest="hgo_sat", type=float, default=DEFAULT_HGO_SAT)
    est.add_argument("--dense-out", default=None, help="Dense (t, z) evaluation file for spline methods")
    est.add_argument("--dense-per-interval", type=int, default=10)
    _add_estimator_flags(est)
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="Generate a noisy test-signal scenario")
    sim.add_argument("--h", type=float, required=True, help="Nominal sampling step")
    sim.add_argument("--sigma", type=float, required=True, help="Noise standard deviation")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--horizon", type=float, default=DEFAULT_HORIZON)
    sim.add_argument("--out", required=True, help="Output CSV with columns t, y")
    sim.add_argument("--truth-out", default=None, help="Also write t, x, z of the noise-free signal")
    sim.set_defaults(func=cmd_simulate)

    bch = sub.add_parser("bench", help="Run the benchmark grid")
    bch.add_argument("--config", default=None, help="TOML grid configuration")
    bch.add_argument("--seeds", type=int, default=None, help="Number of seeds per cell")
    bch.add_argument("--seed", type=int, default=None, help="First evaluation seed")
    bch.add_argument("--h", type=float, default=None, help="Run a single row with this step")
    bch.add_argument("--sigma", type=float, default=None, help="Noise level of the single row")
    bch.add_argument("--horizon", type=float, default=None)
    bch.add_argument("--lambda-zero", dest="lam_zero", type=float, default=None,
                     help="Penalty weight for the zero-order spline only")
    bch.add_argument("--methods", nargs="+", choices=ALL_METHODS, default=None)
    bch.add_argument("--full", action="store_true", help="Only the full-interval scenario")
    bch.add_argument("--workers", type=int, default=None)
    bch.add_argument("--out-dir", default=None, help=f"Output directory (default {OUT_DIR})")
    bch.add_argument("--no-plots", action="store_true", help="Skip plot-data files")
    _add_estimator_flags(bch)
    bch.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else LOG_LEVEL)

    if args.command == "estimate":
        args.lam = DEFAULT_LAMBDA if args.lam is None else args.lam
        args.levant_L = DEFAULT_LEVANT_L if args.levant_L is None else args.levant_L
        args.refactor_every = REFACTOR_EVERY if args.refactor_every is None else args.refactor_every

    try:
        return args.func(args)
    except SplineDiffError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e.filename or ''}: {e.strerror or e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
