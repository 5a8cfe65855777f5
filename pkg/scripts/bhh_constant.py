"""Open-path TSP length over N^((d-1)/d) for uniform clouds, as N grows.

    python scripts/bhh_constant.py --d 2 --N 100 1000 10000 --trials 10
"""
import argparse

from vdsample.sampler_tsp import estimate_bhh_constant


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--N", type=int, nargs="+", default=[100, 1000, 10000])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--effort", default="2opt", choices=["nn", "2opt", "2opt+oropt"])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for N in args.N:
        beta = estimate_bhh_constant(args.d, N, args.trials, seed=args.seed, effort=args.effort)
        print(f"N = {N:>7}: beta ~ {beta:.4f}")


if __name__ == "__main__":
    main()
