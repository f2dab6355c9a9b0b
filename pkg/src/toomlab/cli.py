"""Command-line entry points for the simulation and analysis scenarios.

Exit codes: 0 success, 1 configuration error, 2 when any grid point failed
(the manifest records which).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, default_config, load_config
from .scenarios import Scenario, run_scenario

COMMANDS = (
    "pca-run",
    "langevin-run",
    "phase-scan",
    "error-bench",
    "cumulants",
    "correlations",
    "scgf",
    "correct-trace",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toomlab",
        description=(
            "Simulate Toom-family probabilistic cellular automata directly or "
            "through their driven-oscillator Langevin emulation, and analyze "
            "time-crystalline order and error statistics."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", type=Path, default=None,
                       help="TOML config file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides the config)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides the config)")
        p.add_argument("--quick", action="store_true",
                       help="reduced-statistics tier for smoke runs")
        p.add_argument("--threads", type=int, default=1,
                       help="concurrent realizations per grid point")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.quick:
            cfg.run["tier"] = "quick"
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg.run["seed"] = args.seed
        out_dir = Path(args.out) if args.out else Path(cfg.run["out"])
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    scenario = Scenario(
        kind=args.command, config=cfg, out_dir=out_dir,
        seed=cfg.run["seed"], threads=args.threads,
    )
    manifest = run_scenario(scenario)
    for entry in manifest["grid"]:
        if entry.get("status") == "error":
            print(f"grid point failed: {entry}", file=sys.stderr)
    print(f"wrote {', '.join(manifest['outputs'])} to {out_dir}")
    return 0 if manifest["ok"] else 2


if __name__ == "__main__":
    raise SystemExit(main())
