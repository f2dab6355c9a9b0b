#!/usr/bin/env python3
"""Single-error correction traces across damping ratios and temperatures.

Starts a 32x32 lattice uniformly at +1 with one flipped cell and records the
dense (q_A, q_B) series at that cell for kappa_f in {0.5, 1, 1.5} and
T in {0.5, 2, 10}; the critically damped column relaxes fastest.
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
v = 50.0

[scan]
kappas = [0.5, 1.0, 1.5]
trace_temperatures = [0.5, 2.0, 10.0]
trace_site = [1, 1]
trace_cycles = 3
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/traces"))
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    cfg = loads_config(CONFIG.format(seed=args.seed))
    manifest = run_scenario(Scenario("correct-trace", cfg, args.out))
    print(f"ok={manifest['ok']} outputs={manifest['outputs']}")


if __name__ == "__main__":
    main()
