"""Run the verification checks and write a JSON report.

    python scripts/verify_all.py --out results/verify.json [--checks cheeger,weyl]
"""
import argparse
import json
import time

from vdsample.experiments import VERIFY_CHECKS


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--checks", default=",".join(VERIFY_CHECKS))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="verify.json")
    args = ap.parse_args()
    report = {}
    for name in args.checks.split(","):
        t0 = time.perf_counter()
        report[name] = VERIFY_CHECKS[name](args.seed)
        status = "PASS" if report[name]["passed"] else "FAIL"
        print(f"{status} {name} ({time.perf_counter() - t0:.1f} s)")
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2, default=float)


if __name__ == "__main__":
    main()
