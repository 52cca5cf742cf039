"""Command line entry point.

Each subcommand reads a JSON scenario config, runs the matching driver and
writes its artifacts under --out.  Exit status is 0 on success and 2 for
any config problem (unreadable file, unknown algorithm, bad dimensions).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .harness import ScenarioConfig, ScenarioError, run_scenario

_SUBCOMMANDS = {
    "run": "repeated runs of one algorithm on one scenario",
    "sweep-alpha": "convergence time versus exploration rate",
    "sweep-frame": "non-convergence fraction versus frame size",
    "region": "export rate-region point clouds and boundaries",
    "stability": "queue drainage under arrivals",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="powerpacking",
        description="Distributed slot-by-slot power allocation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="scenario JSON path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's master seed")
        p.add_argument("--budget", type=int, default=None,
                       help="override the per-run update budget")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--parallel", type=int, default=1,
                       help="worker processes for independent runs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        config = ScenarioConfig.from_dict(raw, command=args.command)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.budget is not None:
            overrides["budget"] = args.budget
        if overrides:
            config.params = replace(config.params, **overrides)
        run_scenario(config, args.out, parallel=args.parallel)
    except ScenarioError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
