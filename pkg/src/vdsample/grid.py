"""Cartesian grid dimensions, k-space coordinates and the VDSG binary grid format.

Every k-space quantity in this package (densities, row norms, index sets,
Fourier samples) is stored in the *centered* layout: along each axis of
length ``N`` the stored position ``i`` holds the integer frequency
``k = i - N // 2``, so DC sits at ``N // 2``.  Use :func:`centered_to_fft`
and :func:`fft_to_centered` to move to and from numpy's FFT ordering.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VDSG_MAGIC = b"VDSG"
VDSG_VERSION = 1
_SCALAR_REAL = 0
_SCALAR_COMPLEX = 1


class GridError(ValueError):
    """Invalid grid dimensions or grid file."""


def _is_pow2(v: int) -> bool:
    return v >= 1 and (v & (v - 1)) == 0


@dataclass(frozen=True)
class GridDims:
    """Dimensions of a d-dimensional Cartesian grid (d in {1, 2, 3})."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(v) for v in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) not in (1, 2, 3):
            raise GridError(f"grid rank must be 1, 2 or 3, got {len(dims)}")
        for v in dims:
            if v < 2 or not _is_pow2(v):
                raise GridError(f"every dimension must be a power of two >= 2, got {dims}")

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return int(np.prod(self.dims))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.dims

    def frequencies(self) -> list[np.ndarray]:
        """Integer frequency along each axis, centered layout."""
        return [np.arange(v) - v // 2 for v in self.dims]

    def radius(self) -> np.ndarray:
        """Euclidean norm |k| of the frequency of every grid cell."""
        grids = np.meshgrid(*self.frequencies(), indexing="ij")
        return np.sqrt(sum(g.astype(float) ** 2 for g in grids))

    def dc_index(self) -> int:
        return int(np.ravel_multi_index(tuple(v // 2 for v in self.dims), self.dims))


def as_dims(dims) -> GridDims:
    if isinstance(dims, GridDims):
        return dims
    if isinstance(dims, (int, np.integer)):
        return GridDims((int(dims),))
    return GridDims(tuple(dims))


def centered_to_fft(grid: np.ndarray) -> np.ndarray:
    return np.fft.ifftshift(grid)


def fft_to_centered(grid: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(grid)


# -- VDSG binary grids -------------------------------------------------------


def write_vdsg(path, grid: np.ndarray) -> None:
    """Write a real (f64) or complex (c128) grid in VDSG format."""
    grid = np.asarray(grid)
    if np.iscomplexobj(grid):
        code, payload = _SCALAR_COMPLEX, np.ascontiguousarray(grid, dtype="<c16")
    else:
        code, payload = _SCALAR_REAL, np.ascontiguousarray(grid, dtype="<f8")
    if not 1 <= grid.ndim <= 255:
        raise GridError("grid rank must be between 1 and 255")
    header = VDSG_MAGIC + struct.pack("<BBB", VDSG_VERSION, code, grid.ndim)
    header += struct.pack(f"<{grid.ndim}I", *grid.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes(order="C"))


def read_vdsg(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != VDSG_MAGIC:
        raise GridError(f"{path}: not a VDSG file")
    version, code, rank = struct.unpack_from("<BBB", data, 4)
    if version != VDSG_VERSION:
        raise GridError(f"{path}: unsupported VDSG version {version}")
    shape = struct.unpack_from(f"<{rank}I", data, 7)
    offset = 7 + 4 * rank
    dtype = {_SCALAR_REAL: "<f8", _SCALAR_COMPLEX: "<c16"}.get(code)
    if dtype is None:
        raise GridError(f"{path}: unknown scalar code {code}")
    count = int(np.prod(shape))
    if count * np.dtype(dtype).itemsize != len(data) - offset:
        raise GridError(f"{path}: payload size does not match header")
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return arr.reshape(shape).astype(complex if code else float)


# -- index sets --------------------------------------------------------------


def write_index_set(path, dims, indices) -> None:
    dims = as_dims(dims)
    doc = {"dims": list(dims.dims), "indices": [int(i) for i in indices]}
    Path(path).write_text(json.dumps(doc))


def read_index_set(path) -> tuple[GridDims, np.ndarray]:
    doc = json.loads(Path(path).read_text())
    dims = as_dims(doc["dims"])
    idx = np.asarray(doc["indices"], dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= dims.n):
        raise GridError(f"{path}: index out of range for dims {dims.dims}")
    return dims, idx
