#!/usr/bin/env python3
"""Quick verification pass: radii, duality values, widths, no-duality gap.

A desk-scale smoke sweep over the library's analytic checks (no volume
walks); prints one line per check and exits nonzero on any failure.
"""

import argparse
import sys

import numpy as np

from mapcones import geometry
from mapcones.cones import BodySpec, Cone, Slice


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--probes", type=int, default=300)
    ap.add_argument("--dirs", type=int, default=2000)
    args = ap.parse_args()
    failures = 0

    for n in (2, 3):
        for cone in (Cone.P, Cone.D, Cone.CP, Cone.T, Cone.SP):
            rep = geometry.radii_verify(BodySpec(cone, n, Slice.BASE),
                                        args.probes, args.seed)
            status = "ok" if rep.ok else "FAIL " + "; ".join(
                c.name for c in rep.failing())
            print(f"radii {cone.value}-base n={n}: {status}")
            failures += not rep.ok

        res = geometry.duality_experiment(n, 20_000, 2_000, args.seed)
        ok = res["max_cp_pair"] <= 1 + 1e-9 and res["max_td_pair"] <= 1 + 1e-9
        print(f"duality n={n}: max pair values {res['max_cp_pair']:.6f}, "
              f"{res['max_td_pair']:.6f} {'ok' if ok else 'FAIL'}")
        failures += not ok

        rep = geometry.no_duality_discrepancy(n, 2_000, args.seed)
        print(f"no-duality n={n}: ratio {rep.ratio:.6f} "
              f"{'ok' if rep.ok else 'FAIL'}")
        failures += not rep.ok

    w = geometry.mean_width_mc(BodySpec(Cone.CP, 2, Slice.BASE), args.dirs, args.seed)
    ok = w.hi.value <= 2 + 3 * w.hi.stderr
    print(f"width cp-base n=2: {w.hi.value:.4f} +- {w.hi.stderr:.4f} "
          f"{'ok' if ok else 'FAIL'}")
    failures += not ok

    print(f"{failures} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
