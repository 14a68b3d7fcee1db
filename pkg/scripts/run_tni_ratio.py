#!/usr/bin/env python3
"""Run the three-volume trace-non-increasing experiment at n = 2.

Estimates vol(TNI), vol(TP) and the operator-interval volume, prints the
ratio against its dimension-free bracket, and verifies the fibration
identities on random channels.
"""

import argparse
import sys

from mapcones import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--steps", type=int, default=96, help="samples per phase")
    ap.add_argument("--chains", type=int, default=8)
    ap.add_argument("--out", default="results/tni")
    args = ap.parse_args()
    return cli.main([
        "tni", "--n", "2", "--seed", str(args.seed),
        "--chains", str(args.chains), "--steps", str(args.steps),
        "--out", args.out, "--json",
    ])


if __name__ == "__main__":
    sys.exit(main())
