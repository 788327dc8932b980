"""Monte Carlo MISE against n for the spline at xi = C n^(-2s/(2s+2))."""

import argparse
import json

from spherebayes.diagnostics import rate_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=float, default=5.0)
    ap.add_argument("--n", type=int, nargs="+", default=[100, 200, 400, 800, 1600])
    ap.add_argument("--replicates", type=int, default=20)
    ap.add_argument("--noise", type=float, default=0.5)
    ap.add_argument("--xi-constant", type=float, default=1e-5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rep = rate_experiment(args.s, args.n, args.replicates, args.seed, args.noise, args.xi_constant)
    for n, mise in zip(rep.n_values, rep.mise):
        print(f"n={n:5d}  MISE={mise:.6g}")
    print(f"slope {rep.slope:.4f}  theory {rep.theoretical_slope:.4f}")
    print(json.dumps(rep.to_dict()))


if __name__ == "__main__":
    main()
