"""Command line entry point.

Exit codes: 0 success, 1 some row or selfcheck failed, 2 unknown experiment,
3 invalid config or parameters.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments

EXIT_OK, EXIT_FAILED_ROWS, EXIT_UNKNOWN, EXIT_INVALID = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quermass", description="Run registered random-polytope experiments.")
    ap.add_argument("--config", metavar="PATH", help="JSON config {name, params, seed, workers, output_dir}")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--workers", type=int, help="number of worker processes")
    ap.add_argument("--out", metavar="DIR", help="output directory (overrides config output_dir)")
    ap.add_argument("--list", action="store_true", help="print the experiment registry")
    ap.add_argument("--selfcheck", action="store_true", help="run the fast analytic invariant table")
    ap.add_argument("--plot", choices=sorted(experiments.PLOT_KINDS), help="also emit plot data of this kind")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.list:
        print(experiments.registry_listing())
        return EXIT_OK
    if args.selfcheck:
        ok, table = experiments.selfcheck()
        sys.stdout.write(table)
        return EXIT_OK if ok else EXIT_FAILED_ROWS
    if not args.config:
        print("error: --config is required (or use --list / --selfcheck)", file=sys.stderr)
        return EXIT_INVALID

    try:
        config = experiments.ExperimentConfig.from_json(args.config)
    except (OSError, json.JSONDecodeError, experiments.InvalidParamsError, ValueError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.seed is not None:
        config.seed = args.seed
    if args.workers is not None:
        config.workers = args.workers
    if args.out is not None:
        config.output_dir = args.out

    try:
        report = experiments.run(config)
    except experiments.UnknownExperimentError:
        print(f"error: unknown experiment {config.name!r}; registered:", file=sys.stderr)
        print("\n".join(experiments.REGISTRY), file=sys.stderr)
        return EXIT_UNKNOWN
    except experiments.InvalidParamsError as exc:
        print(f"error: invalid params:\n{exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.plot:
        try:
            paths = experiments.emit_plotdata(report, args.plot, config.output_dir)
            print("plot data: " + " ".join(paths))
        except experiments.PlotDataError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID

    failed = [r for r in report.rows if not r["pass"]]
    print(f"{config.name}: {len(report.rows)} rows, {len(failed)} failed -> {config.output_dir}")
    for r in failed:
        print("FAILED " + json.dumps(experiments._clean({"params": r["params"], "error": r.get("error"), "estimates": r["estimates"]})))
    return EXIT_FAILED_ROWS if failed else EXIT_OK
