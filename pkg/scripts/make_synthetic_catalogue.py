"""Write synthetic inputs for the CLI: a regression CSV and a direction catalogue."""

import argparse

import numpy as np

from spherebayes.catalogue import write_catalogue
from spherebayes.synthetic import (
    clustered_directions,
    nonzonal_truth,
    regression_sample,
    zonal_truth,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--truth", choices=("zonal", "nonzonal"), default="zonal")
    ap.add_argument("--directions", type=int, default=2000, help="catalogue size")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--prefix", default="synthetic")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    truth = zonal_truth if args.truth == "zonal" else nonzonal_truth
    data = regression_sample(truth, args.n, args.noise, rng)
    with open(f"{args.prefix}_regression.csv", "w") as fh:
        fh.write("theta,phi,y\n")
        for (t, p), y in zip(data.points, data.y):
            fh.write(f"{t:.17g},{p:.17g},{y:.17g}\n")
    write_catalogue(f"{args.prefix}_directions.csv", clustered_directions(args.directions, rng))
    print(f"wrote {args.prefix}_regression.csv and {args.prefix}_directions.csv")


if __name__ == "__main__":
    main()
