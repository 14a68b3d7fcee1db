#!/usr/bin/env python3
"""Estimate the volume radii of all five bases at n = 2 and print the table.

Writes report.json / report.csv under --out (default ./results/tables).
"""

import argparse
import sys

from mapcones import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--steps", type=int, default=96, help="samples per phase")
    ap.add_argument("--chains", type=int, default=8)
    ap.add_argument("--out", default="results/tables")
    args = ap.parse_args()
    return cli.main([
        "tables", "--n", "2", "--suite", "bases",
        "--seed", str(args.seed), "--chains", str(args.chains),
        "--steps", str(args.steps), "--out", args.out, "--json",
    ])


if __name__ == "__main__":
    sys.exit(main())
