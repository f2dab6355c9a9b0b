#!/usr/bin/env python3
"""Connected two-point correlations of the errors in space and time.

Writes corr.csv with the translation-averaged <E(u+d) E(u)>_c / P_E over a
spatial offset grid for several time separations; the anisotropy follows the
north-east-center neighborhood of the rule.
"""

import argparse
from pathlib import Path

from toomlab.config import loads_config
from toomlab.scenarios import Scenario, run_scenario

CONFIG = """
[run]
engine = "langevin"
width = 32
height = 32
seed = {seed}

[langevin]
v = 100.0
temperature = {temperature}

[scan]
trajectories = 300
traj_warmup = 12
traj_cycles = 16
dts = [1, 2, 3]
radius = 3
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/correlations"))
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--temperature", type=float, default=5.17)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    cfg = loads_config(CONFIG.format(seed=args.seed, temperature=args.temperature))
    if args.quick:
        cfg.run["tier"] = "quick"
    manifest = run_scenario(
        Scenario("correlations", cfg, args.out, threads=args.threads)
    )
    print(f"ok={manifest['ok']} outputs={manifest['outputs']}")


if __name__ == "__main__":
    main()
