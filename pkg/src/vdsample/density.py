"""Target sampling densities, coherence constants and measurement-count bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridDims, as_dims, read_vdsg, write_vdsg
from .transforms import AcquisitionModel

SUM_TOL = 1e-12

# constants of the three recovery bounds
C_IID = 26.25
C_MIXED = 7.0 / 3.0
C_MARKOV = 12.0


class DensityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Nonnegative probability mass on a grid (centered k-space layout)."""

    dims: GridDims
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = as_dims(self.dims)
        mass = np.array(self.mass, dtype=float).reshape(dims.shape)
        if not np.all(np.isfinite(mass)) or mass.min() < 0:
            raise DensityError("density must be finite and nonnegative")
        if abs(mass.sum() - 1.0) > SUM_TOL:
            raise DensityError(f"density sums to {mass.sum()!r}, expected 1")
        mass.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_weights(cls, dims, weights) -> "DensityGrid":
        dims = as_dims(dims)
        w = np.asarray(weights, dtype=float).reshape(dims.shape)
        total = w.sum()
        if not total > 0:
            raise DensityError("weights have no positive mass")
        return cls(dims, w / total)

    @classmethod
    def uniform(cls, dims) -> "DensityGrid":
        dims = as_dims(dims)
        return cls(dims, np.full(dims.shape, 1.0 / dims.n))

    @property
    def flat(self) -> np.ndarray:
        return self.mass.ravel()

    def save(self, path) -> None:
        write_vdsg(path, self.mass)

    @classmethod
    def load(cls, path) -> "DensityGrid":
        mass = read_vdsg(path)
        return cls(mass.shape, mass)


@dataclass(frozen=True)
class BoundReport:
    kind: str
    K: float
    m_required: float
    s: int
    eta: float
    n: int
    m1: int = 0
    epsilon: float | None = None


def optimal_density(model: AcquisitionModel) -> DensityGrid:
    """pi_i proportional to ||a_i||_inf^2, the minimizer of K(A, .)."""
    return DensityGrid.from_weights(model.dims, model.row_infnorms ** 2)


def polynomial_density(dims, exponent: float) -> DensityGrid:
    """Mass proportional to |k|^-exponent; the DC cell gets the |k| = 1 value."""
    if exponent < 0:
        raise DensityError("exponent must be nonnegative")
    dims = as_dims(dims)
    radius = dims.radius()
    radius[radius == 0] = 1.0
    return DensityGrid.from_weights(dims, radius ** (-float(exponent)))


def _index_mask(n: int, indices) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices,
                     dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= n:
            raise DensityError("index out of range")
        mask[idx] = True
    return mask


def K_value(model: AcquisitionModel, p: DensityGrid, excluded=()) -> float:
    """Coherence constant max_i ||a_i||_inf^2 / p_i over rows not in ``excluded``."""
    if p.dims != model.dims:
        raise DensityError("density and model grids differ")
    norms2 = model.row_infnorms.ravel() ** 2
    keep = ~_index_mask(model.n, excluded)
    norms2, mass = norms2[keep], p.flat[keep]
    if np.any((mass == 0) & (norms2 > 0)):
        raise DensityError("zero density on a row with nonzero norm")
    pos = mass > 0
    if not np.any(pos):
        return 0.0
    return float(np.max(norms2[pos] / mass[pos]))


def deterministic_set(model: AcquisitionModel, m1: int) -> np.ndarray:
    """Indices of the ``m1`` rows with largest sup-norm (ties: lower index first)."""
    n = model.n
    if not 0 <= m1 <= n:
        raise DensityError(f"m1 must lie in [0, {n}], got {m1}")
    order = np.argsort(-model.row_infnorms.ravel(), kind="stable")
    return order[:m1].astype(np.int64)


def restrict_and_renormalize(p: DensityGrid, excluded) -> DensityGrid:
    mask = _index_mask(p.dims.n, excluded)
    if not mask.any():
        return p
    w = p.flat.copy()
    w[mask] = 0.0
    if not w.sum() > 0:
        raise DensityError("all mass lies in the excluded set")
    return DensityGrid.from_weights(p.dims, w)


def _check_bound_inputs(K, s, eta, n, epsilon=1.0):
    if not K > 0:
        raise DensityError("K must be positive")
    if s < 1:
        raise DensityError("sparsity s must be >= 1")
    if not 0 < eta < 1:
        raise DensityError("eta must lie in (0, 1)")
    if n < 1:
        raise DensityError("n must be >= 1")
    if not 0 < epsilon <= 1:
        raise DensityError("spectral gap must lie in (0, 1]")


def bound_iid(K: float, s: int, eta: float, n: int) -> BoundReport:
    """m >= C K s ln^2(6n/eta) with C = 26.25."""
    _check_bound_inputs(K, s, eta, n)
    m = C_IID * K * s * math.log(6 * n / eta) ** 2
    return BoundReport("IID", K, m, s, eta, n)


def bound_mixed(K_restricted: float, m1: int, s: int, eta: float, n: int) -> BoundReport:
    """m >= m1 + (7/3) K s ln^2(6n/eta), K taken over the complement of Omega_1."""
    _check_bound_inputs(K_restricted, s, eta, n)
    if m1 < 0:
        raise DensityError("m1 must be nonnegative")
    m = m1 + C_MIXED * K_restricted * s * math.log(6 * n / eta) ** 2
    return BoundReport("Mixed", K_restricted, m, s, eta, n, m1=m1)


def bound_markov(K: float, s: int, eta: float, epsilon: float, n: int) -> BoundReport:
    """m >= (12 / eps) K^2 s^2 log(2 n^2 / eta)."""
    _check_bound_inputs(K, s, eta, n, epsilon)
    m = C_MARKOV / epsilon * K ** 2 * s ** 2 * math.log(2 * n ** 2 / eta)
    return BoundReport("Markov", K, m, s, eta, n, epsilon=epsilon)
