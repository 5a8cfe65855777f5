"""Independent variable-density drawing and the mixed deterministic + iid scheme."""

from __future__ import annotations

import numpy as np

from .density import DensityGrid, deterministic_set, restrict_and_renormalize
from .schemes import SamplingScheme, unique_in_order
from .transforms import AcquisitionModel


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; ``seed`` may be an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(master_seed: int, trial: int) -> int:
    """Per-trial seed: first 64-bit word of SeedSequence([master, trial])."""
    return int(np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1, np.uint64)[0])


class InverseCDF:
    """Exact inverse-CDF sampler over a flattened probability vector."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float).ravel()
        self.cdf = np.cumsum(w)
        self.total = self.cdf[-1]
        self.last = int(np.flatnonzero(w > 0)[-1])

    def __call__(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size) * self.total
        idx = np.searchsorted(self.cdf, u, side="right")
        # u * total can round up to total; map to the last positive cell
        return np.minimum(idx, self.last).astype(np.int64)


def _draw(p: DensityGrid, m: int, rng, distinct: bool) -> np.ndarray:
    sampler = InverseCDF(p.flat)
    if not distinct:
        return sampler(rng, m)
    support = int(np.count_nonzero(p.flat))
    if m > support:
        raise ValueError(f"cannot draw {m} distinct indices from a support of {support}")
    log = []
    seen: set[int] = set()
    batch = max(16, m)
    while len(seen) < m:
        for i in sampler(rng, batch).tolist():
            log.append(i)
            seen.add(i)
            if len(seen) == m:
                break
    return np.asarray(log, dtype=np.int64)


def draw_iid(p: DensityGrid, m: int, seed=None, distinct: bool = False) -> SamplingScheme:
    """Draw ``m`` independent indices from ``p``.

    With ``distinct=True`` drawing continues until ``m`` different indices
    are collected; the raw sequence (with repeats) is kept in ``draw_log``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = make_rng(seed)
    log = _draw(p, m, rng, distinct)
    return SamplingScheme(p.dims, unique_in_order(log), draw_log=log,
                          seed=_seed_value(seed), provenance="IID",
                          params={"m": m, "distinct": distinct})


def draw_mixed(model: AcquisitionModel, p: DensityGrid, m1: int, m2: int,
               seed=None, distinct: bool = False) -> SamplingScheme:
    """Top-``m1`` coherent rows plus ``m2`` iid draws on the complement."""
    if m1 + m2 > model.n:
        raise ValueError("m1 + m2 exceeds the grid size")
    omega1 = deterministic_set(model, m1)
    rng = make_rng(seed)
    if m2 > 0:
        q = restrict_and_renormalize(p, omega1)
        log = _draw(q, m2, rng, distinct)
    else:
        log = np.zeros(0, dtype=np.int64)
    omega = unique_in_order(np.concatenate([omega1, log]))
    return SamplingScheme(p.dims, omega, omega1=omega1, draw_log=log,
                          seed=_seed_value(seed), provenance="Mixed",
                          params={"m1": m1, "m2": m2, "distinct": distinct})


def _seed_value(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None
