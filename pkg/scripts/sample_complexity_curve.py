"""Tabulate the sample-size bound N(epsilon, delta) for plotting."""
import argparse

import numpy as np

from kahm.bounds import sample_complexity
from kahm.io import write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="sample_complexity.csv")
    ap.add_argument("--deltas", default="0.1,0.05,0.01")
    ap.add_argument("--eps-min", type=float, default=0.01)
    ap.add_argument("--eps-max", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=100)
    args = ap.parse_args()
    eps = np.geomspace(args.eps_min, args.eps_max, args.points)
    cols = {"epsilon": eps}
    for d in (float(s) for s in args.deltas.split(",")):
        cols[f"n_delta_{d:g}"] = np.array([sample_complexity(e, d) for e in eps], dtype=np.int64)
    write_table(args.out, cols)
    print(f"wrote {args.points} rows to {args.out}")


if __name__ == "__main__":
    main()
