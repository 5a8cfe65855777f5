"""Mean TSP occupation vs target density, with and without the exponent correction.

    python scripts/tsp_limit_density.py --trials 100 --N 500 2000 5000
"""
import argparse
import json

from vdsample.density import polynomial_density
from vdsample.sampler_tsp import verify_limit_density


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=int, default=16)
    ap.add_argument("--exponent", type=float, default=2.0)
    ap.add_argument("--N", type=int, nargs="+", default=[500, 2000, 5000])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json")
    args = ap.parse_args()
    p = polynomial_density((args.h, args.h), args.exponent)
    rep = verify_limit_density(p, args.N, args.trials, seed=args.seed)
    print(f"{'N':>6} {'corrected':>9} {'TV(occ, p)':>11} {'TV(occ, limit)':>15}")
    for r in rep.rows:
        print(f"{r.N:>6} {str(r.corrected):>9} {r.tv_to_target:>11.4f} {r.tv_to_limit:>15.4f}")
    for corrected, slope in rep.slope.items():
        print(f"log-log slope occupation vs city density (corrected={corrected}): {slope:.4f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2)


if __name__ == "__main__":
    main()
