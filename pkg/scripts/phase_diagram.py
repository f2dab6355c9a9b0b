#!/usr/bin/env python3
"""Phase diagram of the period-doubled order parameter.

Runs the direct pi-Toom PCA over a grid of error rates and the driven-lattice
emulation over a temperature grid at v = 50 and 100, recording the plateau
order parameter and the measured per-cell error rate so both curves can be
plotted against the same axis. Full tier takes hours; --quick minutes.
"""

import argparse
from pathlib import Path

from toomlab.config import loads_config
from toomlab.scenarios import Scenario, run_scenario

PCA_CONFIG = """
[run]
engine = "pca"
width = 32
height = 32
seed = {seed}

[scan]
error_rates = [0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.15, 0.2]
realizations = 50
window_start = 750
window_cycles = 500
"""

LANGEVIN_CONFIG = """
[run]
engine = "langevin"
width = 32
height = 32
seed = {seed}

[langevin]
v = 100.0

[scan]
temperatures = [3.0, 4.0, 5.17, 6.5, 8.0, 9.6, 11.0, 11.94, 14.0]
v_values = [50.0, 100.0]
realizations = 50
window_start = 750
window_cycles = 500
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/phase_diagram"))
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    for name, text in (("pca", PCA_CONFIG), ("langevin", LANGEVIN_CONFIG)):
        cfg = loads_config(text.format(seed=args.seed))
        if args.quick:
            cfg.run["tier"] = "quick"
        manifest = run_scenario(
            Scenario("phase-scan", cfg, args.out / name, threads=args.threads)
        )
        print(f"{name}: ok={manifest['ok']} outputs={manifest['outputs']}")


if __name__ == "__main__":
    main()
