#!/usr/bin/env python3
"""End-to-end experiment run: sweeps plus Monte Carlo verification, into out/.

Writes:
  out/sweep_p.csv       break-even slow bid as the fast bidder speeds up
  out/sweep_vol.csv     same, as volatility grows
  out/sweep_na.csv      shading slope as integrated competition grows
  out/hybrid_mc.json    1e6-replication check of the hybrid equilibrium
  out/candle_mc.json    1e6-replication check of the candlestick equilibrium
"""

import sys
from pathlib import Path

from pbslab.cli import main

OUT = Path(__file__).resolve().parent.parent / "out"


def run() -> int:
    OUT.mkdir(exist_ok=True)
    jobs = [
        ["sweep", "--axis", "p", "--grid", "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1",
         "--vol", "0.2", "--delta", "1", "--out", str(OUT / "sweep_p.csv")],
        ["sweep", "--axis", "vol", "--grid", "0.05,0.1,0.2,0.3,0.5,0.8",
         "--p", "0.5", "--out", str(OUT / "sweep_vol.csv")],
        ["sweep", "--axis", "na", "--grid", "1,2,3,4,5,8", "--nb", "1",
         "--out", str(OUT / "sweep_na.csv")],
        ["simulate", "--model", "hybrid", "--na", "3", "--nb", "1",
         "--reps", "1000000", "--seed", "42", "--out", str(OUT / "hybrid_mc.json")],
        ["simulate", "--model", "candlestick", "--p", "0.5", "--reps", "1000000",
         "--seed", "42", "--out", str(OUT / "candle_mc.json")],
    ]
    for argv in jobs:
        rc = main(argv)
        if rc != 0:
            print(f"command failed ({rc}): {' '.join(argv)}", file=sys.stderr)
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(run())
