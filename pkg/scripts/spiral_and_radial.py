"""Radial law of the variable density spiral and of uniform spokes.

    python scripts/spiral_and_radial.py
"""
import argparse

from vdsample.sampler_parametric import SpiralSpec, radial_density_slope, spiral_radial_tv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--turns", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--r0", type=float, default=0.005)
    ap.add_argument("--spokes", type=int, default=32)
    args = ap.parse_args()
    for T in args.turns:
        print(f"spiral {T:>4} turns: TV(radial arc length, 1/rho^2 law) = "
              f"{spiral_radial_tv(SpiralSpec(args.r0, 0.5, T)):.4f}")
    print(f"radial {args.spokes} spokes: density slope vs radius = "
          f"{radial_density_slope(args.spokes):.4f}")


if __name__ == "__main__":
    main()
