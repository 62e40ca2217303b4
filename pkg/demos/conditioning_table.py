#!/usr/bin/env python3
"""Print condition numbers and light efficiencies of the coding schemes.

Also shows where the two-camera Design #2 number comes from: each pixel sees
an unmodulated row and one positive Walsh row, and that 2x16 system has
condition number phi^2 whatever code the pixel carries.
"""
import argparse

import numpy as np

from signcoded.analysis import design2_candidates, design2_pixel_matrix, condition_number, scheme_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    print(f"{'scheme':20s} {'cond':>10s} {'light':>8s}")
    for r in scheme_report(args.m, args.trials, args.seed):
        extra = f"  singular in {r.stats['fraction_singular']:.1%} of draws" if r.stats else ""
        print(f"{r.scheme:20s} {r.condition:10.4f} {r.efficiency:8.4f}{extra}")

    phi2 = (3 + np.sqrt(5)) / 2
    conds = [condition_number(design2_pixel_matrix(args.m, u)) for u in range(1, 1 << args.m)]
    print(f"\nper-pixel Design #2 rows: cond in [{min(conds):.6f}, {max(conds):.6f}], phi^2 = {phi2:.6f}")
    print("stacked alternatives:")
    for k, v in design2_candidates(args.m).items():
        print(f"  {k:28s} {v:.4f}")


if __name__ == "__main__":
    main()
