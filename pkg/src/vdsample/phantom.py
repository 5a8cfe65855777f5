"""Analytic ellipse phantom (modified Shepp-Logan intensities) and image loading."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .grid import read_vdsg

# intensity, semi-axes (a, b), centre (x0, y0), rotation in degrees
SHEPP_LOGAN_MODIFIED = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def ellipse_phantom(shape, supersample: int = 4, ellipses=SHEPP_LOGAN_MODIFIED) -> np.ndarray:
    """Piecewise-constant ellipse image on [-1, 1]^2, cell-averaged by supersampling.

    Rows run top to bottom (y decreasing), columns left to right.
    """
    rows, cols = shape
    ss = int(supersample)
    ys = 1 - (np.arange(rows * ss) + 0.5) * 2 / (rows * ss)
    xs = -1 + (np.arange(cols * ss) + 0.5) * 2 / (cols * ss)
    X, Y = np.meshgrid(xs, ys)
    img = np.zeros_like(X)
    for value, a, b, x0, y0, deg in ellipses:
        th = np.deg2rad(deg)
        dx, dy = X - x0, Y - y0
        u = dx * np.cos(th) + dy * np.sin(th)
        v = -dx * np.sin(th) + dy * np.cos(th)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += value
    return img.reshape(rows, ss, cols, ss).mean(axis=(1, 3))


def load_image(source, dims) -> np.ndarray:
    """``"builtin"`` for the ellipse phantom, or a path to a VDSG or .npy grid."""
    shape = tuple(int(v) for v in dims)
    if source in (None, "builtin"):
        if len(shape) != 2:
            raise ValueError("the builtin phantom is 2D")
        return ellipse_phantom(shape)
    path = Path(source)
    img = np.load(path) if path.suffix == ".npy" else read_vdsg(path)
    if img.shape != shape:
        raise ValueError(f"image {path} has shape {img.shape}, expected {shape}")
    return img
