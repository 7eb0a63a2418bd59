"""Reproduce the two-run variogram figure (thin wrapper over the CLI).

Runs the depth-10 experiment at its two growth settings, pools an
8-path ensemble per run, and writes the variogram CSVs plus an SVG with
both relative variograms against lag time on a log axis.
"""

import sys

from atlasid.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce-fig1", *sys.argv[1:]]))
