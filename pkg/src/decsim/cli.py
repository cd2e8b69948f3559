"""Command-line entry point.

Subcommands: simulate, sweep, percolation, baseline. Exit codes: 0 on
success, 1 for config problems, 2 for data problems, 3 for anything else.
The output directory resolves as --out flag > DECSIM_OUTPUT_DIR env var >
config [output] dir.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config, load_sweep, percolation_step
from .errors import CapacityError, ConfigError, DataFormatError
from .metrics import mean_accuracy
from .runner import percolation_report, persist_runs, run_config, run_sweep

ENV_OUTPUT_DIR = "DECSIM_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decsim",
        description="Simulate decentralised model averaging under targeted node disruption.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory override")

    p_sim = sub.add_parser("simulate", help="run one config (all repetition seeds)")
    add_common(p_sim)
    p_sim.add_argument("--seed", type=int, default=None,
                       help="run only this repetition seed")

    p_base = sub.add_parser("baseline", help="run the config with disruption disabled")
    add_common(p_base)
    p_base.add_argument("--seed", type=int, default=None,
                        help="run only this repetition seed")

    p_sweep = sub.add_parser("sweep", help="expand the [sweep] section and run every combination")
    add_common(p_sweep)
    p_sweep.add_argument("--workers", type=int, default=1,
                         help="parallel worker processes (default 1)")

    p_perc = sub.add_parser("percolation", help="percolation curves and centrality tables")
    add_common(p_perc)
    return parser


def _resolve_out(args, cfg_output_dir: str) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(ENV_OUTPUT_DIR)
    if env:
        return Path(env)
    return Path(cfg_output_dir)


def _simulate(args, force_baseline: bool) -> int:
    cfg = load_config(args.config)
    if force_baseline:
        cfg = replace(cfg, threshold=None)
    if args.seed is not None:
        cfg = replace(cfg, repetition_seeds=(args.seed,))
    out_dir = _resolve_out(args, cfg.output_dir)
    records = run_config(cfg)
    run_dir = persist_runs(cfg, records, out_dir)
    for record in records:
        final = mean_accuracy(record.frame, record.frame.rounds)
        fired = (f"disrupted at round {record.plan.triggered_round}"
                 if record.plan.triggered else "no disruption")
        print(f"seed {record.seed}: final mean accuracy {final:.4f} ({fired})")
    print(f"results written to {run_dir}")
    return EXIT_OK


def _sweep(args) -> int:
    cfgs = load_sweep(args.config)
    out_dir = _resolve_out(args, cfgs[0].output_dir)
    records, errors = run_sweep(cfgs, out_dir, workers=args.workers)
    print(f"{len(records)} runs across {len(cfgs)} configs; {len(errors)} failed")
    for err in errors:
        print(f"  failed {err['run_id']} ({err['case']}): {err['error']}", file=sys.stderr)
    print(f"results written to {out_dir}")
    return EXIT_OK if not errors else EXIT_RUNTIME


def _percolation(args) -> int:
    cfg = load_config(args.config)
    step = percolation_step(args.config)
    out_dir = _resolve_out(args, cfg.output_dir)
    report_dir = percolation_report(cfg, out_dir, step_fraction=step)
    print(f"percolation report written to {report_dir}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args, force_baseline=False)
        if args.command == "baseline":
            return _simulate(args, force_baseline=True)
        if args.command == "sweep":
            return _sweep(args)
        if args.command == "percolation":
            return _percolation(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, CapacityError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
