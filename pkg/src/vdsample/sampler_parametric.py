"""Closed-form baselines: variable density spiral, radial spokes and
readout lines for 3D grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityGrid
from .empirical import tv_distance
from .grid import as_dims
from .sampler_iid import InverseCDF, make_rng
from .sampler_tsp import Trajectory, TrajectoryError, loglog_slope, trajectory_scheme
from .schemes import SamplingScheme, unique_in_order


def dc_center(dims) -> np.ndarray:
    """Unit-cube coordinates of the DC cell centre (slightly above 1/2)."""
    h = np.asarray(as_dims(dims).dims, dtype=float)
    return (h // 2 + 0.5) / h


def _direction(theta):
    """Unit vector at angle theta from the horizontal axis, in array-axis order."""
    return np.stack([np.sin(theta), np.cos(theta)], axis=-1)


@dataclass(frozen=True)
class SpiralSpec:
    r0: float
    r1: float = 0.5
    turns: int = 16
    samples_per_turn: int = 256

    def __post_init__(self):
        if not 0 < self.r0 < self.r1 <= 0.5:
            raise TrajectoryError("spiral radii need 0 < r0 < r1 <= 1/2")
        if self.turns < 1 or self.samples_per_turn < 8:
            raise TrajectoryError("turns >= 1 and samples_per_turn >= 8 required")

    def radius(self, t):
        """r(t) = r0 r1 / (r1 - t (r1 - r0)), increasing from r0 to r1."""
        t = np.asarray(t, dtype=float)
        return self.r0 * self.r1 / (self.r1 - t * (self.r1 - self.r0))


def spiral_trajectory(spec: SpiralSpec, center=(0.5, 0.5)) -> Trajectory:
    """Polyline of r(theta / (2 pi T)) (cos, sin) for theta in [0, 2 pi T]."""
    count = spec.turns * spec.samples_per_turn + 1
    t = np.linspace(0.0, 1.0, count)
    theta = 2 * np.pi * spec.turns * t
    pts = np.asarray(center, dtype=float) + spec.radius(t)[:, None] * _direction(theta)
    return Trajectory(pts)


def spiral_scheme(dims, turns: int, r0: float | None = None, r1: float = 0.5,
                  samples_per_turn: int = 256) -> SamplingScheme:
    """Spiral centred on the DC cell; r0 defaults to a quarter pixel so the
    curve starts inside that cell."""
    dims = as_dims(dims)
    if dims.d != 2:
        raise TrajectoryError("spiral schemes are 2D")
    r0 = 0.25 / max(dims.dims) if r0 is None else r0
    spec = SpiralSpec(r0, r1, turns, samples_per_turn)
    traj = spiral_trajectory(spec, dc_center(dims))
    return trajectory_scheme(traj, dims, "Spiral",
                             params={"turns": turns, "r0": r0, "r1": r1})


def radial_histogram(traj: Trajectory, center, edges, step: float = 1e-4) -> np.ndarray:
    """Fraction of arc length falling in each ring [edges[k], edges[k+1])."""
    count = int(np.ceil(traj.total_length / step)) + 1
    s = np.linspace(0.0, traj.total_length, count)
    cum = traj.cumulative_length
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
    frac = (s - cum[k]) / (cum[k + 1] - cum[k])
    pts = traj.vertices[k] + frac[:, None] * (traj.vertices[k + 1] - traj.vertices[k])
    mid = (pts[1:] + pts[:-1]) / 2
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    rho = np.linalg.norm(mid - np.asarray(center), axis=1)
    hist, _ = np.histogram(rho, bins=edges, weights=seg)
    return hist / hist.sum()


def spiral_ring_masses(edges) -> np.ndarray:
    """Ring masses of the planar density proportional to 1/rho^2:
    proportional to log(rho_b / rho_a)."""
    edges = np.asarray(edges, dtype=float)
    w = np.log(edges[1:] / edges[:-1])
    return w / w.sum()


def spiral_radial_tv(spec: SpiralSpec, bins: int = 32) -> float:
    """TV between the spiral's radial arc-length histogram and the 1/rho^2 law."""
    edges = np.geomspace(spec.r0, spec.r1, bins + 1)
    traj = spiral_trajectory(spec)
    return tv_distance(radial_histogram(traj, (0.5, 0.5), edges), spiral_ring_masses(edges))


# -- radial -------------------------------------------------------------------


def _clip_line_to_box(center, direction):
    """Parameters (s_min, s_max) where center + s * direction meets [0,1]^2."""
    lo, hi = -np.inf, np.inf
    for c, u in zip(center, direction):
        if abs(u) < 1e-15:
            continue
        a, b = (0.0 - c) / u, (1.0 - c) / u
        lo = max(lo, min(a, b))
        hi = min(hi, max(a, b))
    return lo, hi


def spoke_angles(spokes: int, angle_rule: str = "uniform", seed=None) -> np.ndarray:
    if spokes < 1:
        raise ValueError("spokes must be >= 1")
    if angle_rule == "uniform":
        return np.pi * np.arange(spokes) / spokes
    if angle_rule == "random":
        return np.sort(make_rng(seed).random(spokes) * np.pi)
    raise ValueError(f"unknown angle rule {angle_rule!r}")


def spoke_trajectory(dims, theta: float) -> Trajectory:
    """Full diameter through the DC cell centre at angle theta, clipped to the box."""
    c = dc_center(dims)
    u = _direction(theta)
    lo, hi = _clip_line_to_box(c, u)
    return Trajectory(np.clip(np.stack([c + lo * u, c + hi * u]), 0.0, 1.0))


def radial_density_slope(spokes: int, bins: int = 24, r_min: float = 0.02) -> float:
    """Log-log slope of arc length per unit area against radius, for
    uniform spokes through (1/2, 1/2), over rings inside the inscribed disc."""
    edges = np.geomspace(r_min, 0.5, bins + 1)
    hist = np.zeros(bins)
    for th in spoke_angles(spokes):
        u = _direction(th)
        traj = Trajectory(np.stack([0.5 - 0.5 * u, 0.5 + 0.5 * u]))
        hist += radial_histogram(traj, (0.5, 0.5), edges)
    area = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    mid = np.sqrt(edges[1:] * edges[:-1])
    return loglog_slope(mid, hist / area)


def radial_scheme(dims, spokes: int, angle_rule: str = "uniform", seed=None) -> SamplingScheme:
    """Union of regridded diameters; angles uniform on [0, pi) or random."""
    dims = as_dims(dims)
    if dims.d != 2:
        raise TrajectoryError("radial schemes are 2D")
    angles = spoke_angles(spokes, angle_rule, seed)
    logs = [trajectory_scheme(spoke_trajectory(dims, th), dims, "Radial").draw_log
            for th in angles]
    log = np.concatenate(logs)
    tag = "Radial" if angle_rule == "uniform" else "RadialRandom"
    return SamplingScheme(dims, unique_in_order(log), draw_log=log,
                          seed=int(seed) if isinstance(seed, (int, np.integer)) else None,
                          provenance=tag, params={"spokes": spokes, "angles": angles.tolist()})


# -- 3D readout lines -----------------------------------------------------------


def lines3d_scheme(p2d: DensityGrid, dims, m_lines: int, seed=None) -> SamplingScheme:
    """iid positions in the plane of axes (0, 1) drawn from ``p2d``; each
    position acquires its full line along the last (readout) axis."""
    dims = as_dims(dims)
    if dims.d != 3:
        raise TrajectoryError("readout-line schemes need a 3D grid")
    if p2d.dims.dims != dims.dims[:2]:
        raise TrajectoryError("plane density must match the first two axes")
    plane_n = p2d.dims.n
    if not 1 <= m_lines <= plane_n:
        raise ValueError(f"m_lines must lie in [1, {plane_n}]")
    rng = make_rng(seed)
    positions = InverseCDF(p2d.flat)(rng, m_lines)
    readout = dims.dims[2]
    log = (positions[:, None] * readout + np.arange(readout)[None, :]).ravel()
    return SamplingScheme(dims, unique_in_order(log), draw_log=log,
                          seed=int(seed) if isinstance(seed, (int, np.integer)) else None,
                          provenance="Lines3D",
                          params={"m_lines": m_lines, "plane_draws": positions.tolist()})
