"""Command-line interface: train, sweep-droprate, sweep-depth, report,
selftest."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import runner
from .config import RunConfig, load_config
from .selftest import run_selftest


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="JSON or key=value config file")
    p.add_argument("--out", default=None, help="output directory (default: config out_dir)")
    p.add_argument("--workers", type=int, default=1, help="parallel seed workers")


def _load(args) -> tuple[RunConfig, str]:
    cfg = load_config(args.config)
    out = args.out if args.out is not None else cfg.out_dir
    return cfg, out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gclab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one method over the config's seeds")
    _add_common(p_train)
    p_train.add_argument("--seed", type=int, default=None, help="train a single seed instead of the config's list")

    p_rate = sub.add_parser("sweep-droprate", help="drop-rate sweep (Figure-1-style table)")
    _add_common(p_rate)
    p_rate.add_argument("--rates", required=True, help="comma-separated drop rates, e.g. 0.05,0.2,0.4")

    p_depth = sub.add_parser("sweep-depth", help="depth sweep, grace vs grace_s")
    _add_common(p_depth)
    p_depth.add_argument("--layers", required=True, help="comma-separated layer counts, e.g. 2,4,8")

    p_report = sub.add_parser("report", help="aggregate metrics CSVs into summary.json")
    p_report.add_argument("--dir", required=True, help="directory holding metrics_*.csv")

    sub.add_parser("selftest", help="run quick property checks")

    args = parser.parse_args(argv)

    if args.command == "selftest":
        return run_selftest()

    if args.command == "report":
        summary = runner.report(args.dir)
        print(json.dumps({k: v for k, v in summary.items() if k != "bound_checks"}, indent=2, sort_keys=True))
        bc = summary["bound_checks"]
        print(f"bound checks: {bc.get('margin_plus_slack_nonneg', 0)}/{bc.get('rows', 0)} rows pass")
        return 0

    cfg, out = _load(args)
    if args.command == "train":
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seeds=[args.seed])
        results = runner.train_many(cfg, out, workers=args.workers)
        for res in results:
            status = f"aborted at epoch {res.aborted_epoch}" if res.aborted_epoch is not None else "ok"
            print(
                f"{res.method} seed={res.seed}: probe acc {res.probe_test_acc:.4f} "
                f"({res.wall_seconds:.1f}s, {status})"
            )
        return 0

    if args.command == "sweep-droprate":
        rates = [float(r) for r in args.rates.split(",") if r]
        rows = runner.sweep_droprate(cfg, rates, out, workers=args.workers)
        for row in rows:
            print(
                f"rate {row['rate']:.2f}: acc {row['mean_acc']:.4f}±{row['std_acc']:.4f} "
                f"pcd {row['mean_pcd']:.4f} ncd {row['mean_ncd']:.4f}"
            )
        return 0

    if args.command == "sweep-depth":
        layer_counts = [int(v) for v in args.layers.split(",") if v]
        rows = runner.sweep_depth(cfg, layer_counts, out, workers=args.workers)
        for row in rows:
            print(f"layers {row['layers']} {row['method']}: acc {row['mean_acc']:.4f}±{row['std_acc']:.4f}")
        return 0

    parser.error(f"unhandled command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
