"""Print the limit and identity checks for a few seeds."""

import argparse
import json

from spherebayes.diagnostics import limit_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    for seed in args.seeds:
        print(json.dumps(limit_suite(seed).to_dict()))


if __name__ == "__main__":
    main()
