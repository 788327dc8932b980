"""How often the posterior weight p* detects zonal and non-zonal truths."""

import argparse

import numpy as np

from spherebayes.bayes import PriorSpec, fit_hierarchical
from spherebayes.spectral import BasisSpec, WeightScheme
from spherebayes.synthetic import nonzonal_truth, regression_sample, zonal_truth


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicates", type=int, default=50)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = BasisSpec(args.k, weight_scheme=WeightScheme.IOTA)
    prior = PriorSpec(p=args.p)
    rng = np.random.default_rng(args.seed)
    for name, truth in (("zonal", zonal_truth), ("nonzonal", nonzonal_truth)):
        pstar = np.array([
            fit_hierarchical(regression_sample(truth, args.n, args.noise, rng), spec, prior,
                             compute_variance=False).pstar
            for _ in range(args.replicates)
        ])
        print(f"{name:9s} p*>0.9: {np.mean(pstar > 0.9):.2f}  p*<0.1: {np.mean(pstar < 0.1):.2f}"
              f"  median p* {np.median(pstar):.3g}")


if __name__ == "__main__":
    main()
