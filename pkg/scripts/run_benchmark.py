"""Monte Carlo PSNR table for every scheme in a config.

    python scripts/run_benchmark.py scripts/configs/benchmark_64.yaml --threads 4
"""
import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from vdsample.experiments import ExperimentConfig, benchmark_csv, run_benchmark, trials_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config)
    if args.trials:
        cfg = replace(cfg, trials=args.trials)
    t0 = time.perf_counter()
    rows, results = run_benchmark(cfg, threads=args.threads)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "benchmark.csv").write_text(benchmark_csv(rows))
    (out / "trials.csv").write_text(trials_csv(results))
    cfg.dump(out / "config.yaml")
    sys.stdout.write(benchmark_csv(rows))
    print(f"# {len(results)} reconstructions in {time.perf_counter() - t0:.1f} s -> {out}")


if __name__ == "__main__":
    main()
