"""Experiment configuration, scheme factory, PSNR benchmark and the
verification suite behind the command line."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import sampler_markov as markov
from .density import DensityGrid, deterministic_set, optimal_density, polynomial_density
from .empirical import empirical_measure, tv_distance, vds_convergence_report
from .grid import as_dims
from .phantom import load_image
from .reconstruct import ReconstructionConfig, douglas_rachford, measure, psnr
from .sampler_iid import draw_iid, draw_mixed, trial_seed
from .sampler_parametric import (SpiralSpec, lines3d_scheme, radial_scheme,
                                 spiral_radial_tv, spiral_scheme)
from .sampler_tsp import estimate_bhh_constant, tsp_scheme, verify_limit_density
from .schemes import PROVENANCE_TAGS, SamplingScheme
from .transforms import AcquisitionModel, WaveletSpec, wavelet_forward


class ConfigError(ValueError):
    pass


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class SchemeSpec:
    """One benchmark column: a scheme tag plus its parameters.

    ``density`` is ``"inv_k2"`` (1/|k|^2), ``"optimal"`` or ``"poly:<e>"``.
    """

    tag: str
    density: str = "inv_k2"
    alpha: float = 0.0
    label: str | None = None

    def __post_init__(self):
        if self.tag not in PROVENANCE_TAGS:
            raise ConfigError(f"unknown scheme tag {self.tag!r}")
        if not 0 <= self.alpha <= 1:
            raise ConfigError("alpha must lie in [0, 1]")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.tag == "Markov":
            return f"Markov(alpha={self.alpha:g})"
        if self.tag in ("IID", "Mixed", "TSP", "Lines3D"):
            return f"{self.tag}({self.density})"
        return self.tag


DEFAULT_SCHEMES = (
    SchemeSpec("Mixed"),
    SchemeSpec("Markov", alpha=0.1),
    SchemeSpec("Markov", alpha=0.01),
    SchemeSpec("Markov", alpha=0.001),
    SchemeSpec("TSP", density="optimal"),
    SchemeSpec("TSP"),
    SchemeSpec("Spiral"),
    SchemeSpec("Radial"),
    SchemeSpec("RadialRandom"),
)

BENCHMARK_RECON = ReconstructionConfig(gamma=0.1, tol_fixed_point=1e-6, max_iter=2000)


@dataclass(frozen=True)
class ExperimentConfig:
    phantom: str = "builtin"
    dims: tuple[int, ...] = (64, 64)
    wavelet: WaveletSpec = field(default_factory=WaveletSpec)
    schemes: tuple[SchemeSpec, ...] = DEFAULT_SCHEMES
    R: float = 5.0
    m1_fraction: float = 0.1
    trials: int = 20
    seed: int = 0
    out: str = "results"
    reconstruction: ReconstructionConfig = BENCHMARK_RECON
    verify: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "dims", as_dims(self.dims).dims)
        if not self.R > 1:
            raise ConfigError("sampling ratio R must exceed 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.m1_fraction < 1:
            raise ConfigError("m1_fraction must lie in [0, 1)")
        if self.phantom != "builtin" and not Path(self.phantom).is_file():
            raise ConfigError(f"phantom file {self.phantom} not found")
        unknown = set(self.verify) - set(VERIFY_CHECKS)
        if unknown:
            raise ConfigError(f"unknown verification checks {sorted(unknown)}")
        try:
            self.wavelet.check_dims(as_dims(self.dims))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def n(self) -> int:
        return int(np.prod(self.dims))

    @property
    def m(self) -> int:
        return int(round(self.n / self.R))

    @property
    def m1(self) -> int:
        return int(round(self.m1_fraction * self.m))

    def to_dict(self) -> dict:
        return {
            "phantom": self.phantom,
            "dims": list(self.dims),
            "wavelet": {"family": self.wavelet.family, "levels": self.wavelet.levels},
            "schemes": [{k: v for k, v in asdict(s).items() if v is not None} for s in self.schemes],
            "R": self.R,
            "m1_fraction": self.m1_fraction,
            "trials": self.trials,
            "seed": self.seed,
            "out": self.out,
            "reconstruction": self.reconstruction.to_dict(),
            "verify": list(self.verify),
        }

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "ExperimentConfig":
        doc = dict(doc or {})
        known = {"phantom", "dims", "wavelet", "schemes", "R", "m1_fraction", "trials",
                 "seed", "out", "reconstruction", "verify"}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        kw = {}
        try:
            if "phantom" in doc:
                ph = str(doc["phantom"])
                if ph != "builtin" and base_dir is not None and not Path(ph).is_absolute():
                    ph = str(Path(base_dir) / ph)
                kw["phantom"] = ph
            if "dims" in doc:
                kw["dims"] = tuple(int(v) for v in doc["dims"])
            if "wavelet" in doc:
                kw["wavelet"] = WaveletSpec(**doc["wavelet"])
            if "schemes" in doc:
                kw["schemes"] = tuple(SchemeSpec(**s) for s in doc["schemes"])
            for key, conv in (("R", float), ("m1_fraction", float), ("trials", int),
                              ("seed", int), ("out", str)):
                if key in doc:
                    kw[key] = conv(doc[key])
            if "reconstruction" in doc:
                kw["reconstruction"] = ReconstructionConfig(**doc["reconstruction"])
            if "verify" in doc:
                kw["verify"] = tuple(doc["verify"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            doc = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if doc is not None and not isinstance(doc, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(doc, base_dir=path.parent)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


# -- scheme factory --------------------------------------------------------------


class Context:
    """Model, densities and calibrated parameters shared by all trials."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.dims = as_dims(cfg.dims)
        self.model = AcquisitionModel.build(self.dims, cfg.wavelet)
        self.omega1 = deterministic_set(self.model, cfg.m1)
        self._densities: dict[str, DensityGrid] = {}
        self._calibrated: dict[str, int] = {}
        self._image = None

    @property
    def image(self) -> np.ndarray:
        if self._image is None:
            self._image = load_image(self.cfg.phantom, self.cfg.dims)
        return self._image

    @property
    def coefficients(self) -> np.ndarray:
        return wavelet_forward(self.image, self.cfg.wavelet, self.dims)

    def density(self, name: str) -> DensityGrid:
        if name not in self._densities:
            if name == "optimal":
                p = optimal_density(self.model)
            elif name == "inv_k2":
                p = polynomial_density(self.dims, 2.0)
            elif name.startswith("poly:"):
                p = polynomial_density(self.dims, float(name[5:]))
            else:
                raise ConfigError(f"unknown density {name!r}")
            self._densities[name] = p
        return self._densities[name]

    def parameter(self, spec: SchemeSpec) -> int | None:
        """Turns or spokes of the deterministic curves giving |omega| closest to m."""
        if spec.tag not in ("Spiral", "Radial"):
            return None
        if spec.tag not in self._calibrated:
            build = spiral_scheme if spec.tag == "Spiral" else radial_scheme
            self._calibrated[spec.tag] = calibrate(lambda v: build(self.dims, v),
                                                   self.cfg.m)[1]
        return self._calibrated[spec.tag]


def calibrate(build, target: int, lo: int = 1):
    """Bisect an integer size parameter v so that build(v).m is closest to
    ``target``; build(v).m is assumed (roughly) increasing in v.

    Returns (scheme, v).
    """
    cache = {}

    def size(v):
        if v not in cache:
            cache[v] = build(v)
        return cache[v].m

    hi = lo
    while size(hi) < target:
        lo, hi = hi, hi * 2
        if hi > 10 ** 7:
            raise ConfigError("calibration did not reach the target size")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if size(mid) < target:
            lo = mid
        else:
            hi = mid
    best = lo if abs(size(lo) - target) < abs(size(hi) - target) else hi
    return cache[best], best


def make_scheme(ctx: Context, spec: SchemeSpec, seed: int) -> SamplingScheme:
    cfg, model = ctx.cfg, ctx.model
    m, m1 = cfg.m, cfg.m1
    if spec.tag == "Full":
        return SamplingScheme(ctx.dims, np.arange(ctx.dims.n), provenance="Full")
    if spec.tag == "IID":
        return draw_iid(ctx.density(spec.density), m, seed=seed, distinct=True)
    if spec.tag == "Mixed":
        return draw_mixed(model, ctx.density(spec.density), m1, m - m1, seed=seed, distinct=True)
    if spec.tag == "Markov":
        kernel = markov.mix_with_jumps(markov.metropolis_kernel(ctx.density(spec.density)),
                                       spec.alpha)
        return markov.run_chain(kernel, target=m, seed=seed, omega1=ctx.omega1)
    if spec.tag == "TSP":
        # city count chosen per trial; cities are a prefix of one seeded stream
        p = ctx.density(spec.density)
        return calibrate(lambda N: tsp_scheme(p, N, seed=seed, omega1=ctx.omega1), m, lo=2)[0]
    if spec.tag == "Spiral":
        return spiral_scheme(ctx.dims, ctx.parameter(spec))
    if spec.tag == "Radial":
        return radial_scheme(ctx.dims, ctx.parameter(spec))
    if spec.tag == "RadialRandom":
        return calibrate(lambda k: radial_scheme(ctx.dims, k, "random", seed), m)[0]
    if spec.tag == "Lines3D":
        if ctx.dims.d != 3:
            raise ConfigError("Lines3D needs a 3D grid")
        plane = DensityGrid.from_weights(ctx.dims.dims[:2],
                                         polynomial_density(ctx.dims.dims[:2], 2.0).mass)
        return lines3d_scheme(plane, ctx.dims, max(1, m // ctx.dims.dims[2]), seed)
    raise ConfigError(f"scheme {spec.tag} is not available in benchmarks")


def scheme_seed(master: int, trial: int, column: int) -> int:
    return trial_seed(trial_seed(master, trial), column)


# -- benchmark ---------------------------------------------------------------------


@dataclass
class TrialResult:
    scheme: str
    trial: int
    m: int
    psnr: float
    iterations: int
    converged: bool


def _run_trial(args):
    cfg, column, trial = args
    ctx = _context(cfg)
    spec = cfg.schemes[column]
    scheme = make_scheme(ctx, spec, scheme_seed(cfg.seed, trial, column))
    y = measure(ctx.model, ctx.coefficients, scheme.omega)
    res = douglas_rachford(ctx.model, scheme.omega, y, cfg.reconstruction)
    return TrialResult(spec.name, trial, scheme.m, psnr(ctx.image, res.image),
                       res.iterations, res.converged)


_CONTEXTS: dict[str, Context] = {}


def _context(cfg: ExperimentConfig) -> Context:
    """Per-process cache so pool workers calibrate once per config."""
    key = repr(cfg.to_dict())
    if key not in _CONTEXTS:
        ctx = Context(cfg)
        for spec in cfg.schemes:
            ctx.parameter(spec)
        _CONTEXTS[key] = ctx
    return _CONTEXTS[key]


@dataclass
class BenchmarkRow:
    scheme: str
    m_target: int
    mean_m: float
    mean_psnr: float
    std_psnr: float
    max_psnr: float
    converged: int
    trials: int


def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.6f}"


def run_benchmark(cfg: ExperimentConfig, threads: int = 1):
    """Monte Carlo PSNR per scheme; returns (summary rows, per-trial results)."""
    jobs = [(cfg, j, t) for j in range(len(cfg.schemes)) for t in range(cfg.trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(job) for job in jobs]
    rows = []
    for spec in cfg.schemes:
        rs = [r for r in results if r.scheme == spec.name]
        vals = np.array([r.psnr for r in rs])
        finite = np.all(np.isfinite(vals))
        rows.append(BenchmarkRow(
            spec.name, cfg.m, float(np.mean([r.m for r in rs])),
            float(vals.mean()) if finite else math.inf,
            float(vals.std()) if finite else 0.0,
            float(vals.max()), sum(r.converged for r in rs), len(rs)))
    return rows, results


def benchmark_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "m_target", "mean_m", "mean_psnr", "std_psnr", "max_psnr",
                "converged", "trials"])
    for r in rows:
        w.writerow([r.scheme, r.m_target, f"{r.mean_m:.2f}", _fmt(r.mean_psnr),
                    _fmt(r.std_psnr), _fmt(r.max_psnr), r.converged, r.trials])
    return buf.getvalue()


def trials_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "trial", "m", "psnr", "iterations", "converged"])
    for r in results:
        w.writerow([r.scheme, r.trial, r.m, _fmt(r.psnr), r.iterations, int(r.converged)])
    return buf.getvalue()


def read_benchmark_csv(text: str) -> list[BenchmarkRow]:
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append(BenchmarkRow(r["scheme"], int(r["m_target"]), float(r["mean_m"]),
                                 float(r["mean_psnr"]), float(r["std_psnr"]),
                                 float(r["max_psnr"]), int(r["converged"]), int(r["trials"])))
    return rows


# -- verification suite ------------------------------------------------------------


def check_vds(seed: int) -> dict:
    """Metropolis chain on 16x16 with p ~ 1/|k|^2: TV decreasing in chain length."""
    p = polynomial_density((16, 16), 2.0)
    kernel = markov.metropolis_kernel(p)

    def gen(N, rng):
        return markov.run_chain(kernel, steps=N, seed=rng).draw_log

    rep = vds_convergence_report(gen, p, [10 ** 3, 10 ** 4, 10 ** 5], trials=5, seed=seed)
    return {"passed": rep.monotone_decreasing, **rep.to_dict()}


def check_cheeger(seed: int) -> dict:
    reps = [markov.verify_cheeger_bound(d) for d in ((8, 8), (16, 16))]
    return {"passed": all(r.holds for r in reps), "reports": [r.to_dict() for r in reps]}


def check_weyl(seed: int) -> dict:
    p = polynomial_density((8, 8), 2.0)
    rows = markov.weyl_check(markov.metropolis_kernel(p), (0.01, 0.1, 0.5))
    rows += markov.weyl_check(markov.torus_walk((8, 8)), (0.01, 0.1, 0.5))
    return {"passed": all(ok for _, _, ok in rows),
            "rows": [{"alpha": a, "gap": g, "holds": ok} for a, g, ok in rows]}


def check_tsp_exponent(seed: int) -> dict:
    p = polynomial_density((16, 16), 2.0)
    rep = verify_limit_density(p, [500, 2000], trials=10, seed=seed)
    slope = rep.slope[False]
    corrected = rep.tv_series(True)
    passed = abs(slope - 0.5) <= 0.05 and corrected[-1] < corrected[0]
    return {"passed": bool(passed), **rep.to_dict()}


def check_bhh(seed: int) -> dict:
    est = {N: estimate_bhh_constant(2, N, trials=3, seed=seed) for N in (1000, 4000)}
    spread = abs(est[4000] - est[1000]) / est[4000]
    return {"passed": spread < 0.1, "estimates": {str(k): v for k, v in est.items()},
            "relative_spread": spread}


def check_certificate(seed: int) -> dict:
    model = AcquisitionModel.build((16, 16), WaveletSpec("haar", 2))
    full = markov.juditsky_certificate(model, DensityGrid.uniform((16, 16)),
                                       np.arange(256), s_max=10)
    pi = optimal_density(model)
    resid = [markov.juditsky_certificate(model, pi, draw_iid(pi, m, seed=trial_seed(seed, m)).draw_log,
                                         10).infnorm_residual for m in (100, 1000, 10000)]
    passed = full.infnorm_residual == 0 and resid[0] > resid[1] > resid[2]
    return {"passed": bool(passed), "full_residual": full.infnorm_residual, "iid_residuals": resid}


def check_spiral(seed: int) -> dict:
    tvs = [spiral_radial_tv(SpiralSpec(0.005, 0.5, T)) for T in (16, 32, 64)]
    return {"passed": tvs[-1] < 0.05 and tvs[0] > tvs[1] > tvs[2], "tv": tvs}


def check_chain_tv(seed: int) -> dict:
    p = polynomial_density((16, 16), 2.0)
    scheme = markov.run_chain(markov.metropolis_kernel(p), steps=10 ** 5, seed=seed)
    tv = tv_distance(empirical_measure(scheme.draw_log, p.dims), p)
    return {"passed": tv < 0.05, "tv": tv}


VERIFY_CHECKS = {
    "vds": check_vds,
    "chain_tv": check_chain_tv,
    "cheeger": check_cheeger,
    "weyl": check_weyl,
    "tsp_exponent": check_tsp_exponent,
    "bhh": check_bhh,
    "certificate": check_certificate,
    "spiral": check_spiral,
}


def run_verification(names=None, seed: int = 0) -> dict:
    names = list(names) if names else list(VERIFY_CHECKS)
    return {name: VERIFY_CHECKS[name](seed) for name in names}
