"""Command line entry point: ``vdsample {density,scheme,reconstruct,verify,benchmark}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .density import K_value
from .experiments import (ConfigError, Context, ExperimentConfig, SchemeSpec, benchmark_csv,
                          make_scheme, run_benchmark, run_verification, trials_csv,
                          VERIFY_CHECKS)
from .grid import write_vdsg
from .phantom import load_image
from .reconstruct import douglas_rachford, measure, psnr
from .sampler_parametric import SpiralSpec, dc_center, spiral_trajectory
from .sampler_tsp import tsp_trajectory, write_trajectory_csv
from .sampler_markov import ChainBudgetExceeded
from .schemes import SamplingScheme, write_pbm
from .transforms import AcquisitionModel, wavelet_forward

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if getattr(args, "dims", None):
        overrides["dims"] = tuple(args.dims)
    if getattr(args, "trials", None):
        overrides["trials"] = args.trials
    return replace(cfg, **overrides) if overrides else cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(type(v))


def cmd_density(args) -> int:
    cfg = _load_config(args)
    ctx = Context(cfg)
    p = ctx.density(args.density)
    out = _out_dir(cfg)
    p.save(out / "density.vdsg")
    K = K_value(ctx.model, p)
    _json(out / "density.json", {"density": args.density, "dims": list(cfg.dims),
                                 "wavelet": cfg.wavelet.to_dict(), "K": K})
    print(f"density {args.density}: K = {K:.6g} -> {out / 'density.vdsg'}")
    return EXIT_OK


def _trajectory(ctx: Context, spec: SchemeSpec, scheme: SamplingScheme):
    if spec.tag == "TSP":
        return tsp_trajectory(ctx.density(spec.density), scheme.params["N"], seed=scheme.seed,
                              omega1=ctx.omega1)
    if spec.tag == "Spiral":
        pr = scheme.params
        return spiral_trajectory(SpiralSpec(pr["r0"], pr["r1"], pr["turns"]), dc_center(ctx.dims))
    return None


def cmd_scheme(args) -> int:
    cfg = _load_config(args)
    spec = SchemeSpec(args.tag, density=args.density, alpha=args.alpha)
    ctx = Context(cfg)
    scheme = make_scheme(ctx, spec, cfg.seed)
    out = _out_dir(cfg)
    scheme.save(out / "scheme.json")
    if ctx.dims.d == 2:
        write_pbm(out / "mask.pbm", scheme)
    traj = _trajectory(ctx, spec, scheme)
    if traj is not None:
        write_trajectory_csv(out / "trajectory.csv", traj)
    print(f"{spec.name}: m = {scheme.m} (R = {scheme.sampling_ratio:.3f}) -> {out / 'scheme.json'}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args)
    try:
        scheme = SamplingScheme.load(args.scheme)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read scheme {args.scheme}: {exc}") from exc
    if scheme.dims.dims != cfg.dims:
        cfg = replace(cfg, dims=scheme.dims.dims)
    image = load_image(args.image or cfg.phantom, cfg.dims)
    model = AcquisitionModel.build(cfg.dims, cfg.wavelet)
    y = measure(model, wavelet_forward(image, cfg.wavelet, model.dims), scheme.omega)
    res = douglas_rachford(model, scheme.omega, y, cfg.reconstruction)
    out = _out_dir(cfg)
    write_vdsg(out / "reconstruction.vdsg", res.image)
    value = psnr(image, res.image)
    _json(out / "metrics.json", {**res.metadata(), "psnr": "inf" if math.isinf(value) else value,
                                 "m": scheme.m})
    print(f"PSNR {value:.4f} dB, {res.iterations} iterations, converged={res.converged}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    names = args.checks.split(",") if args.checks else list(cfg.verify or VERIFY_CHECKS)
    unknown = set(names) - set(VERIFY_CHECKS)
    if unknown:
        raise ConfigError(f"unknown checks {sorted(unknown)}; choose from {sorted(VERIFY_CHECKS)}")
    report = run_verification(names, seed=cfg.seed)
    out = _out_dir(cfg)
    _json(out / "verify.json", report)
    for name, res in report.items():
        print(f"{'PASS' if res['passed'] else 'FAIL'} {name}")
    return EXIT_OK if all(r["passed"] for r in report.values()) else EXIT_NONCONVERGED


def cmd_benchmark(args) -> int:
    cfg = _load_config(args)
    rows, results = run_benchmark(cfg, threads=args.threads)
    out = _out_dir(cfg)
    table = benchmark_csv(rows)
    (out / "benchmark.csv").write_text(table)
    (out / "trials.csv").write_text(trials_csv(results))
    cfg.dump(out / "config.yaml")
    sys.stdout.write(table)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--threads", type=int, default=1, help="worker processes")

    parser = _Parser(prog="vdsample",
                     description="variable density sampling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", parents=[common], help="write a target density grid")
    p.add_argument("--density", default="optimal", help="optimal | inv_k2 | poly:<exponent>")
    p.add_argument("--dims", type=int, nargs="+")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("scheme", parents=[common], help="generate a sampling scheme")
    p.add_argument("--tag", default="TSP", help="IID, Mixed, Markov, TSP, Spiral, Radial, ...")
    p.add_argument("--density", default="inv_k2")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--dims", type=int, nargs="+")
    p.set_defaults(func=cmd_scheme)

    p = sub.add_parser("reconstruct", parents=[common], help="l1 reconstruction from a scheme")
    p.add_argument("--scheme", required=True, help="scheme JSON")
    p.add_argument("--image", help="reference image (VDSG or .npy); default: config phantom")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("verify", parents=[common], help="run verification checks")
    p.add_argument("--checks", help="comma separated subset of: " + ",".join(VERIFY_CHECKS))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("benchmark", parents=[common], help="Monte Carlo PSNR table")
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ChainBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValueError, OSError) as exc:
        # configuration, grid, scheme and density errors all derive from ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
