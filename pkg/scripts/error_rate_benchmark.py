#!/usr/bin/env python3
"""Error rate per space-time cell versus v/T for the shipped rules.

Measures P_E for the do-nothing, Toom and pi-Toom drives (25 cycles after 200
warm-up cycles on 32x32) and writes it next to the Boltzmann estimate
(1/2) Erfc(sqrt(v_I / 2T)) for comparison.
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
v = {v}

[scan]
rules = ["do_nothing", "toom", "pi_toom"]
v_over_t = [5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0, 22.5, 25.0]
warmup_cycles = 200
measure_cycles = 25
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/error_bench"))
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--v", type=float, default=50.0)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    cfg = loads_config(CONFIG.format(seed=args.seed, v=args.v))
    if args.quick:
        cfg.run["tier"] = "quick"
    manifest = run_scenario(Scenario("error-bench", cfg, args.out))
    print(f"ok={manifest['ok']} outputs={manifest['outputs']}")


if __name__ == "__main__":
    main()
