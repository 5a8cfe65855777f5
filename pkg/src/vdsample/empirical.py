"""Empirical measures and Monte Carlo diagnostics of variable density samplers."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .density import DensityGrid
from .grid import GridDims, as_dims
from .sampler_iid import make_rng


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    dims: GridDims
    counts: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    @property
    def mass(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    def as_density(self) -> DensityGrid:
        return DensityGrid.from_weights(self.dims, self.counts)


def empirical_measure(visits, dims) -> EmpiricalMeasure:
    """Normalized histogram of a visit sequence of linear grid indices."""
    dims = as_dims(dims)
    visits = np.asarray(visits, dtype=np.int64).ravel()
    if visits.size == 0:
        raise ValueError("empty visit sequence")
    if visits.min() < 0 or visits.max() >= dims.n:
        raise ValueError("visit index out of range")
    counts = np.bincount(visits, minlength=dims.n).reshape(dims.shape)
    return EmpiricalMeasure(dims, counts)


def _mass(x) -> np.ndarray:
    if isinstance(x, DensityGrid):
        return x.mass
    if isinstance(x, EmpiricalMeasure):
        return x.mass
    return np.asarray(x, dtype=float)


def tv_distance(p, q) -> float:
    """Total variation distance 0.5 * sum |p_i - q_i|."""
    a, b = _mass(p), _mass(q)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(0.5 * np.abs(a - b).sum())


@dataclass
class ConvergenceRow:
    N: int
    mean_tv: float
    std_tv: float


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]

    @property
    def monotone_decreasing(self) -> bool:
        means = [r.mean_tv for r in self.rows]
        return all(b < a for a, b in zip(means, means[1:]))

    def mean(self, N: int) -> float:
        return next(r.mean_tv for r in self.rows if r.N == N)

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows],
                "monotone_decreasing": self.monotone_decreasing}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["N", "mean_tv", "std_tv"])
            for r in self.rows:
                writer.writerow([r.N, repr(r.mean_tv), repr(r.std_tv)])

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def read_csv(cls, path) -> "ConvergenceReport":
        with open(path, newline="") as fh:
            rows = [ConvergenceRow(int(r["N"]), float(r["mean_tv"]), float(r["std_tv"]))
                    for r in csv.DictReader(fh)]
        return cls(rows)


def vds_convergence_report(generator: Callable[[int, np.random.Generator], np.ndarray],
                           target: DensityGrid, N_list, trials: int,
                           seed=0) -> ConvergenceReport:
    """Mean and std of TV(empirical measure of N visits, target) per N.

    ``generator(N, rng)`` returns N visited linear indices.  Each trial uses
    its own child generator, shared across the N values so that trials are
    comparable.
    """
    N_list = [int(v) for v in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing")
    children = np.random.SeedSequence(seed).spawn(trials)
    tv = np.empty((len(N_list), trials))
    for t, child in enumerate(children):
        for j, N in enumerate(N_list):
            rng = make_rng(child.spawn(1)[0])
            visits = generator(N, rng)
            tv[j, t] = tv_distance(empirical_measure(visits, target.dims), target)
    rows = [ConvergenceRow(N, float(tv[j].mean()), float(tv[j].std()))
            for j, N in enumerate(N_list)]
    return ConvergenceReport(rows)
