"""Command-line entry point: ``rlosim run|sweep|compare|calibrate|validate``."""

from __future__ import annotations

import argparse
import json
import sys

from ..scenario import ConfigError
from . import experiment as ex
from .config import load

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_LOCK = 3
EXIT_ANALYSIS = 4

_STATUS_EXIT = {ex.STATUS_OK: EXIT_OK, ex.STATUS_LOCK_FAILURE: EXIT_LOCK,
                ex.STATUS_ANALYSIS_FAILURE: EXIT_ANALYSIS}


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rlosim", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    def scenario_args(p, out=True):
        p.add_argument("--scenario", required=True, help="scenario JSON (path or packaged name)")
        p.add_argument("--seed", type=_u64, default=None, help="override the scenario seed")
        if out:
            p.add_argument("--out", required=True, help="result directory")

    p = sub.add_parser("run", help="simulate and analyze one scenario")
    scenario_args(p)
    p.add_argument("--csv", action="store_true", help="also export controller-rate columns as CSV")
    p = sub.add_parser("sweep", help="run the pump x length grid of a scenario")
    scenario_args(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p = sub.add_parser("compare", help="diff two run result directories")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--out", required=True)
    p = sub.add_parser("calibrate", help="vacuum and dark reference traces")
    scenario_args(p)
    p = sub.add_parser("validate", help="check a scenario file")
    scenario_args(p, out=False)
    return ap


def _config_error(exc: ConfigError) -> int:
    for path, msg in exc.errors:
        print(f"config error: {path}: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "compare":
        try:
            report = ex.compare_summaries(ex.load_summary(args.run_a), ex.load_summary(args.run_b))
        except ex.CompareError as exc:
            print(f"compare error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        ex.write_compare(report, args.out)
        for key, row in report["metrics"].items():
            print(f"{key:22s} a={row['a']!s:>24s} b={row['b']!s:>24s} diff={row['difference']}")
        return EXIT_OK
    try:
        scenario = load(args.scenario, args.seed)
    except ConfigError as exc:
        return _config_error(exc)

    if args.verb == "validate":
        print(f"ok {scenario.name} config_hash={scenario.config_hash()}")
        return EXIT_OK
    if args.verb == "calibrate":
        summary = ex.run_calibration(scenario, args.out)
        print(json.dumps(summary, indent=2, sort_keys=True))
        return EXIT_OK
    if args.verb == "run":
        result = ex.run_experiment(scenario, args.out, write_csv=args.csv)
        r = result.summary["results"]
        print(f"status: {result.status}")
        if result.summary.get("message"):
            print(f"message: {result.summary['message']}", file=sys.stderr)
        for key in ("v_minus_db", "v_plus_db", "sigma_closed_rad", "sigma_pilot_rad", "sigma_open_rad",
                    "cycle_slips", "overall_efficiency"):
            if key in r:
                print(f"{key}: {r[key]}")
        return _STATUS_EXIT[result.status]
    if args.verb == "sweep":
        if args.jobs < 1:
            print("config error: --jobs: must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        summary = ex.run_sweep(scenario, args.out, jobs=args.jobs)
        print(f"status: {summary['status']} ({summary['n_ok']}/{summary['n_points']} points ok)")
        failed = [row["status"] for row in summary["rows"] if row["status"] != ex.STATUS_OK]
        if not failed:
            return EXIT_OK
        return EXIT_LOCK if failed[0] == ex.STATUS_LOCK_FAILURE else EXIT_ANALYSIS
    return EXIT_CONFIG  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
