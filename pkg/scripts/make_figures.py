#!/usr/bin/env python3
"""Regenerate the bid-schedule charts into out/.

Produces the Beta(2,2) schedule with three builders on each side (the
headline curved-shading picture) and the uniform single-neutral benchmark
whose schedule is the straight line of slope 3/4.
"""

import sys
from pathlib import Path

from pbslab.cli import main

OUT = Path(__file__).resolve().parent.parent / "out"


def run() -> int:
    OUT.mkdir(exist_ok=True)
    jobs = [
        ["figure", "--fa", "beta(2,2)", "--fb", "beta(2,2)",
         "--na", "3", "--nb", "3", "--out", str(OUT / "beta_schedule.svg")],
        ["figure", "--fa", "uniform(0,1)", "--fb", "uniform(0,1)",
         "--na", "3", "--nb", "1", "--out", str(OUT / "uniform_single.svg")],
    ]
    for argv in jobs:
        rc = main(argv)
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(run())
