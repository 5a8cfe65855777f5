"""Unitary FFT, periodic orthogonal wavelet transforms and the operator A = F Psi.

``A`` maps wavelet coefficients ``z`` to centered k-space samples:
``A z = fft_forward(wavelet_inverse(z))``.  Both factors are orthogonal,
hence ``A`` is unitary.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import GridDims, as_dims, centered_to_fft, fft_to_centered

# Least-asymmetric Daubechies scaling filter with 10 vanishing moments (sym10).
SYMMLET10 = (
    -0.0004593294210046588, 5.7036083618494284e-05, 0.004593173585311828,
    -0.0008043589320165449, -0.02035493981231129, 0.005764912033581909,
    0.04999497207737669, -0.0319900568824278, -0.03553674047381755,
    0.38382676106708546, 0.7695100370211071, 0.47169066693843925,
    -0.07088053578324385, -0.15949427888491757, 0.011609893903711381,
    0.0459272392310922, -0.0014653825813050513, -0.008641299277022422,
    9.563267072289475e-05, 0.0007701598091144901,
)
HAAR = (2 ** -0.5, 2 ** -0.5)

ORTHO_TOL = 1e-10


class TransformError(ValueError):
    pass


def check_orthonormal_filter(taps, tol: float = ORTHO_TOL) -> None:
    """Raise unless ``taps`` generate an orthonormal two-channel filter bank.

    The check synthesizes the dense single-level analysis matrix on the
    smallest power-of-two length that holds the filter without wrap-around
    and verifies ``W W^T = I``.
    """
    taps = np.asarray(taps, dtype=float)
    if taps.ndim != 1 or taps.size < 2 or taps.size % 2:
        raise TransformError("filter must have an even number (>= 2) of taps")
    size = 2
    while size < taps.size:
        size *= 2
    w = _level_matrix(tuple(taps), size).toarray()
    err = np.abs(w @ w.T - np.eye(size)).max()
    if err > tol:
        raise TransformError(f"filter bank is not orthonormal (max deviation {err:.3e})")


@dataclass(frozen=True)
class WaveletSpec:
    """Orthogonal wavelet family and number of decomposition levels.

    ``levels == 0`` is the identity transform (pure Fourier sensing).
    ``family`` is ``"haar"``, ``"sym10"`` or ``"custom"`` (then ``taps`` holds
    the scaling filter).
    """

    family: str = "sym10"
    levels: int = 3
    taps: tuple[float, ...] | None = None

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam not in ("haar", "sym10", "custom"):
            raise TransformError(f"unknown wavelet family {self.family!r}")
        if fam == "custom":
            if self.taps is None:
                raise TransformError("custom wavelet needs filter taps")
            object.__setattr__(self, "taps", tuple(float(t) for t in self.taps))
            check_orthonormal_filter(self.taps)
        if self.levels < 0:
            raise TransformError("levels must be non-negative")

    @classmethod
    def identity(cls) -> "WaveletSpec":
        return cls("haar", 0)

    @property
    def scaling_filter(self) -> tuple[float, ...]:
        if self.family == "haar":
            return HAAR
        if self.family == "sym10":
            return SYMMLET10
        return self.taps

    def check_dims(self, dims: GridDims) -> None:
        if self.levels > int(np.log2(min(dims.dims))):
            raise TransformError(
                f"{self.levels} levels is too many for grid {dims.dims}")

    def to_dict(self) -> dict:
        out = {"family": self.family, "levels": self.levels}
        if self.family == "custom":
            out["taps"] = list(self.taps)
        return out


@lru_cache(maxsize=128)
def _level_matrix(taps: tuple[float, ...], size: int) -> sp.csr_matrix:
    """Single-level periodic analysis operator of shape (size, size).

    Rows ``k < size/2`` give ``sum_n h[n] x[(2k+n) mod size]`` (scaling part),
    the remaining rows use the quadrature mirror ``g[n] = (-1)^n h[L-1-n]``.
    Filters longer than ``size`` fold onto the period.
    """
    h = np.asarray(taps, dtype=float)
    length = h.size
    g = h[::-1] * (-1.0) ** np.arange(length)
    half = size // 2
    k = np.repeat(np.arange(half), length)
    n = np.tile(np.arange(length), half)
    cols = (2 * k + n) % size
    rows = np.concatenate([k, k + half])
    vals = np.concatenate([np.tile(h, half), np.tile(g, half)])
    mat = sp.coo_matrix((vals, (rows, np.concatenate([cols, cols]))), shape=(size, size))
    return mat.tocsr()


def _apply_axis(mat, block: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(block, axis, 0)
    shape = moved.shape
    out = mat @ moved.reshape(shape[0], -1)
    return np.moveaxis(np.asarray(out).reshape(shape), 0, axis)


def _prepare(x, dims: GridDims | None) -> tuple[np.ndarray, GridDims]:
    x = np.asarray(x)
    if dims is None:
        dims = as_dims(x.shape)
    elif x.shape != dims.shape:
        if x.size != dims.n:
            raise TransformError(f"array of size {x.size} does not match grid {dims.dims}")
        x = x.reshape(dims.shape)
    return x, dims


def wavelet_forward(x, spec: WaveletSpec, dims: GridDims | None = None) -> np.ndarray:
    """Multilevel separable analysis (Mallat layout, coarse block in the corner)."""
    x, dims = _prepare(x, dims)
    spec.check_dims(dims)
    out = np.array(x, dtype=complex if np.iscomplexobj(x) else float)
    sub = dims.dims
    for _ in range(spec.levels):
        region = tuple(slice(0, s) for s in sub)
        block = out[region]
        for axis, size in enumerate(sub):
            block = _apply_axis(_level_matrix(spec.scaling_filter, size), block, axis)
        out[region] = block
        sub = tuple(s // 2 for s in sub)
    return out


def wavelet_inverse(z, spec: WaveletSpec, dims: GridDims | None = None) -> np.ndarray:
    z, dims = _prepare(z, dims)
    spec.check_dims(dims)
    out = np.array(z, dtype=complex if np.iscomplexobj(z) else float)
    for level in reversed(range(spec.levels)):
        sub = tuple(s >> level for s in dims.dims)
        region = tuple(slice(0, s) for s in sub)
        block = out[region]
        for axis, size in enumerate(sub):
            block = _apply_axis(_level_matrix(spec.scaling_filter, size).T, block, axis)
        out[region] = block
    return out


def fft_forward(x, dims: GridDims | None = None) -> np.ndarray:
    """Unitary d-dimensional DFT, output in the centered layout."""
    x, dims = _prepare(x, dims)
    return fft_to_centered(np.fft.fftn(x, norm="ortho"))


def fft_inverse(y, dims: GridDims | None = None) -> np.ndarray:
    y, dims = _prepare(y, dims)
    return np.fft.ifftn(centered_to_fft(y), norm="ortho")


@dataclass(frozen=True, eq=False)
class AcquisitionModel:
    """Grid, sparsifying wavelet and the per-row sup-norms of A = F Psi."""

    dims: GridDims
    wavelet: WaveletSpec
    row_infnorms: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, dims, wavelet: WaveletSpec | None = None) -> "AcquisitionModel":
        dims = as_dims(dims)
        wavelet = WaveletSpec() if wavelet is None else wavelet
        wavelet.check_dims(dims)
        return cls(dims, wavelet, compute_row_infnorms(dims, wavelet))

    @property
    def n(self) -> int:
        return self.dims.n

    def apply(self, z) -> np.ndarray:
        return apply_A(z, self.dims, self.wavelet)

    def adjoint(self, y) -> np.ndarray:
        return apply_A_adjoint(y, self.dims, self.wavelet)


def apply_A(z, dims, wavelet: WaveletSpec) -> np.ndarray:
    dims = as_dims(dims)
    z, _ = _prepare(z, dims)
    return fft_forward(wavelet_inverse(z, wavelet, dims), dims)


def apply_A_adjoint(y, dims, wavelet: WaveletSpec) -> np.ndarray:
    dims = as_dims(dims)
    y, _ = _prepare(y, dims)
    return wavelet_forward(fft_inverse(y, dims), wavelet, dims)


def _subband_representatives(dims: GridDims, levels: int):
    """One coefficient position per subband of the Mallat layout."""
    yield (0,) * dims.d
    for j in range(1, levels + 1):
        for kind in itertools.product((0, 1), repeat=dims.d):
            if any(kind):
                yield tuple((v >> j) if t else 0 for v, t in zip(dims.dims, kind))


def compute_row_infnorms(dims, wavelet: WaveletSpec) -> np.ndarray:
    """Return the grid of ``||a_i||_inf`` for every k-space index ``i``.

    Columns of A inside one subband are circular translates of each other
    (by multiples of the subband stride), so their Fourier moduli coincide.
    The row maximum is therefore the maximum over subbands of
    ``|FFT(psi_subband)|``, needing one synthesis per subband instead of n.
    """
    dims = as_dims(dims)
    wavelet.check_dims(dims)
    if wavelet.levels == 0:
        # pure Fourier: every entry of the unitary DFT has modulus n^-1/2
        return np.full(dims.shape, 1.0 / np.sqrt(dims.n))
    best = np.zeros(dims.shape)
    for pos in _subband_representatives(dims, wavelet.levels):
        unit = np.zeros(dims.shape)
        unit[pos] = 1.0
        col = np.abs(apply_A(unit, dims, wavelet))
        np.maximum(best, col, out=best)
    # columns have unit norm, so anything above 1 is rounding
    return np.minimum(best, 1.0)


def row_infnorms_bruteforce(dims, wavelet: WaveletSpec) -> np.ndarray:
    """Row sup-norms from the wavelet transform of every conjugate Fourier atom.

    O(n^2) work; intended as an oracle for small grids.
    """
    dims = as_dims(dims)
    out = np.empty(dims.n)
    coords = np.meshgrid(*[np.arange(v) for v in dims.dims], indexing="ij")
    for i, k in enumerate(itertools.product(*dims.frequencies())):
        phase = sum(kk * c / v for kk, c, v in zip(k, coords, dims.dims))
        atom = np.exp(2j * np.pi * phase) / np.sqrt(dims.n)
        out[i] = np.abs(wavelet_forward(np.conj(atom), wavelet, dims)).max()
    return out.reshape(dims.shape)


def dense_acquisition_matrix(dims, wavelet: WaveletSpec, max_n: int = 4096) -> np.ndarray:
    """Dense n x n matrix of A (rows: centered k-space linear index)."""
    dims = as_dims(dims)
    if dims.n > max_n:
        raise TransformError(f"dense A refused for n = {dims.n} > {max_n}")
    eye = np.eye(dims.n).reshape((dims.n,) + dims.shape)
    cols = [apply_A(e, dims, wavelet).ravel() for e in eye]
    return np.stack(cols, axis=1)


def dense_wavelet_synthesis(dims, wavelet: WaveletSpec) -> np.ndarray:
    """Dense Psi built column by column from unit coefficient vectors."""
    dims = as_dims(dims)
    eye = np.eye(dims.n).reshape((dims.n,) + dims.shape)
    return np.stack([wavelet_inverse(e, wavelet, dims).ravel() for e in eye], axis=1)


check_orthonormal_filter(HAAR)
check_orthonormal_filter(SYMMLET10)
