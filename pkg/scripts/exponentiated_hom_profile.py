"""Two-condensate coincidence ratio versus packet separation.

Compares the exact finite-n pair-contraction sum under N = alpha n^2 with its
n -> infinity exponential form, for several imbalances and dwell times.
Writes a CSV table to stdout.
"""
import argparse
import sys

import numpy as np

from mesoscatter.diagrams import ScalingSpec, exponentiated_hom, realized_imbalance, two_condensate_finite_n
from mesoscatter.tables import render_csv
from mesoscatter.wavepackets import WavepacketConfig


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--epsilon", type=int, default=1, choices=[1, -1])
    p.add_argument("--n", type=int, nargs="+", default=[10, 20, 40])
    p.add_argument("--x", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    p.add_argument("--dwell", type=float, nargs="+", default=[0.0, 1.0, 5.0])
    p.add_argument("--zmax", type=float, default=12.0)
    p.add_argument("--points", type=int, default=49)
    args = p.parse_args()

    rows = []
    for ratio in args.dwell:
        wp = WavepacketConfig().with_dwell_ratio(ratio)
        for x in args.x:
            frac = (1 + x) / 2
            for z in np.linspace(0.0, args.zmax, args.points):
                row = {"dwell_ratio": ratio, "x": x, "z": float(z),
                       "limit": exponentiated_hom(float(z), ScalingSpec(args.alpha, 2.0, args.epsilon, x), wp)}
                for n in args.n:
                    row[f"finite_n{n}"] = two_condensate_finite_n(n, frac, float(z), args.alpha * n * n,
                                                                  args.epsilon, wp)
                    row[f"x_n{n}"] = realized_imbalance(n, frac)
                rows.append(row)
    cols = ["dwell_ratio", "x", "z", "limit"] + [f"{k}{n}" for n in args.n for k in ("finite_n", "x_n")]
    sys.stdout.write(render_csv(cols, rows, {"alpha": args.alpha, "epsilon": args.epsilon}))


if __name__ == "__main__":
    main()
