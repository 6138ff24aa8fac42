"""Command line entry point: ``run``, ``compare`` and ``matrix`` sub-commands."""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .config import ConfigError, build_setup, load_config
from .geometry import build_separation_matrix
from .harness import SCENARIOS, compare_scenarios, run_scenario
from .operator_sim import ReplayFormatError

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3


def _setup(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "cycles", None) is not None:
        cfg["cycles"] = args.cycles
    return build_setup(cfg)


def _summary_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "cycle", "duration_s"])
    for k, d in enumerate(result.cycle_durations, start=1):
        w.writerow([result.scenario, k, f"{d:.3f}"])
    w.writerow([result.scenario, "total", f"{result.total_duration:.3f}"])
    return buf.getvalue()


def _report_violations(result) -> int:
    if result.violations or not result.completed:
        for v in result.violations[:10]:
            print(f"invariant violation: {v}", file=sys.stderr)
        if not result.completed:
            print("invariant violation: run stopped before completing all cycles", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_run(args) -> int:
    setup = _setup(args)
    spec = setup.spec(args.scenario)
    result, trace = run_scenario(spec)
    trans = ", ".join(f"{k} x{v}" for k, v in sorted(result.transitions.items())) or "none"
    print(f"scenario {result.scenario}: {len(result.cycle_durations)} cycles, "
          f"{result.total_duration:.3f} s total, transitions: {trans}")
    if args.trace:
        trace.to_csv(args.trace)
        if not args.no_figure:
            from .plotting import plot_trace
            plot_trace(trace, Path(args.trace).with_suffix(".png"), f"scenario {result.scenario}")
    if args.summary:
        Path(args.summary).write_text(_summary_csv(result), encoding="utf-8")
    return _report_violations(result)


def cmd_compare(args) -> int:
    setup = _setup(args)
    comparison, results = compare_scenarios([setup.spec(n) for n in SCENARIOS])
    text = comparison.to_csv(args.out)
    print(text, end="")
    for name, ok in comparison.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if not args.no_figure:
        from .plotting import plot_comparison
        plot_comparison(comparison, Path(args.out).with_suffix(".png"))
    codes = [_report_violations(r) for r in results.values()]
    return max(codes)


def cmd_matrix(args) -> int:
    setup = _setup(args)
    matrix = build_separation_matrix(setup.base, setup.compensation)
    if args.csv:
        print(matrix.to_csv(), end="")
    else:
        print(matrix.table_layout())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cobotsafe", description="Keypoint-based cobot safety simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("--scenario", required=True, choices=SCENARIOS)
    run.add_argument("--config", help="YAML config (defaults to the packaged one)")
    run.add_argument("--seed", type=int)
    run.add_argument("--cycles", type=int)
    run.add_argument("--trace", help="per-tick trace CSV; a PNG figure is written beside it")
    run.add_argument("--summary", help="per-cycle duration CSV")
    run.add_argument("--no-figure", action="store_true")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="run every scenario and the two baselines")
    cmp_.add_argument("--config")
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--cycles", type=int)
    cmp_.add_argument("--out", required=True, help="summary CSV; a bar chart PNG is written beside it")
    cmp_.add_argument("--no-figure", action="store_true")
    cmp_.set_defaults(func=cmd_compare)

    mat = sub.add_parser("matrix", help="print the keypoint-pair separation matrix")
    mat.add_argument("--config")
    mat.add_argument("--csv", action="store_true", help="all pairs as CSV instead of the table view")
    mat.set_defaults(func=cmd_matrix)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ReplayFormatError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
