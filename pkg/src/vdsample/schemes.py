"""Sampling schemes: acquired k-space indices with their provenance."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import GridDims, as_dims

PROVENANCE_TAGS = ("IID", "Mixed", "Markov", "TSP", "Spiral", "Radial",
                   "RadialRandom", "Lines3D", "Full")


class SchemeError(ValueError):
    pass


def unique_in_order(seq) -> np.ndarray:
    """Distinct entries of ``seq`` in order of first appearance."""
    seq = np.asarray(seq, dtype=np.int64).ravel()
    if seq.size == 0:
        return seq
    _, first = np.unique(seq, return_index=True)
    return seq[np.sort(first)]


@dataclass(frozen=True, eq=False)
class SamplingScheme:
    """Acquired indices ``omega`` (centered k-space, linear row-major).

    ``draw_log`` keeps every raw draw or visit, duplicates included;
    ``omega`` is its deduplicated union with the deterministic part
    ``omega1``.
    """

    dims: GridDims
    omega: np.ndarray
    omega1: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    draw_log: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    seed: int | None = None
    provenance: str = "IID"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = as_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        for name in ("omega", "omega1", "draw_log"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).ravel()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.provenance not in PROVENANCE_TAGS:
            raise SchemeError(f"unknown provenance {self.provenance!r}")
        omega = self.omega
        if omega.size and (omega.min() < 0 or omega.max() >= dims.n):
            raise SchemeError("index out of range")
        if np.unique(omega).size != omega.size:
            raise SchemeError("omega contains duplicates")
        if not np.isin(self.omega1, omega).all():
            raise SchemeError("omega1 is not a subset of omega")
        if not np.isin(self.draw_log, omega).all():
            raise SchemeError("a raw draw is missing from omega")

    @property
    def m(self) -> int:
        return int(self.omega.size)

    @property
    def sampling_ratio(self) -> float:
        return self.dims.n / max(self.m, 1)

    def mask(self) -> np.ndarray:
        mask = np.zeros(self.dims.n, dtype=bool)
        mask[self.omega] = True
        return mask.reshape(self.dims.shape)

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims.dims),
            "omega": self.omega.tolist(),
            "omega1": self.omega1.tolist(),
            "draw_log": self.draw_log.tolist(),
            "seed": self.seed,
            "provenance": self.provenance,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SamplingScheme":
        return cls(
            dims=as_dims(doc["dims"]),
            omega=doc["omega"],
            omega1=doc.get("omega1", []),
            draw_log=doc.get("draw_log", []),
            seed=doc.get("seed"),
            provenance=doc.get("provenance", "IID"),
            params=doc.get("params", {}),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "SamplingScheme":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other):
        if not isinstance(other, SamplingScheme):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def write_pbm(path, scheme: SamplingScheme) -> None:
    """Plain (P1) PBM of a 2D mask; sampled cells are black (1)."""
    if scheme.dims.d != 2:
        raise SchemeError("PBM export needs a 2D scheme")
    mask = scheme.mask().astype(int)
    rows, cols = mask.shape
    lines = ["P1", f"{cols} {rows}"]
    lines += [" ".join(str(v) for v in row) for row in mask]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pbm(path) -> np.ndarray:
    tokens = [t for line in Path(path).read_text().splitlines()
              if not line.startswith("#") for t in line.split()]
    if tokens[0] != "P1":
        raise SchemeError("only plain PBM (P1) is supported")
    cols, rows = int(tokens[1]), int(tokens[2])
    return np.array(tokens[3:3 + rows * cols], dtype=int).reshape(rows, cols).astype(bool)
