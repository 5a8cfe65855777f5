"""Continuous trajectories through random cities: density correction, a
heuristic shortest Hamiltonian path, constant-speed parametrization,
occupation measures and regridding onto the k-space grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.spatial import cKDTree

from .density import DensityGrid
from .empirical import tv_distance
from .grid import as_dims, write_vdsg
from .sampler_iid import InverseCDF, make_rng, trial_seed
from .schemes import SamplingScheme, unique_in_order

NEIGHBORS = 10
GAIN_EPS = 1e-12


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray = field(repr=False)
    source_density: DensityGrid | None = field(default=None, repr=False)
    seed: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise TrajectoryError("a point cloud needs at least 2 points")
        if pts.min() < 0 or pts.max() > 1:
            raise TrajectoryError("points must lie in the unit hypercube")
        object.__setattr__(self, "points", pts)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def N(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Polyline; ``cumulative_length[k]`` is the arc length up to vertex k."""

    vertices: np.ndarray = field(repr=False)
    cumulative_length: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2:
            raise TrajectoryError("a trajectory needs at least 2 vertices")
        # repeated consecutive vertices add nothing and break strict monotonicity
        keep = np.ones(len(v), dtype=bool)
        keep[1:] = np.any(np.diff(v, axis=0) != 0, axis=1)
        v = v[keep]
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cumulative_length", cum)

    @property
    def total_length(self) -> float:
        return float(self.cumulative_length[-1])

    @property
    def d(self) -> int:
        return self.vertices.shape[1]

    def scaled(self, factor: float) -> "Trajectory":
        return Trajectory(self.vertices * factor)


# -- densities and points -----------------------------------------------------


def target_to_initial_density(p: DensityGrid, d: int | None = None) -> DensityGrid:
    """City density whose TSP occupation tends to ``p``: normalize(p^(d/(d-1)))."""
    d = p.dims.d if d is None else d
    if d not in (2, 3):
        raise TrajectoryError("density correction is defined for d in {2, 3}")
    return DensityGrid.from_weights(p.dims, p.mass ** (d / (d - 1.0)))


def limit_density(q: DensityGrid, d: int | None = None) -> DensityGrid:
    """Occupation limit of a TSP through cities drawn from q: normalize(q^((d-1)/d))."""
    d = q.dims.d if d is None else d
    return DensityGrid.from_weights(q.dims, q.mass ** ((d - 1.0) / d))


def draw_points(q: DensityGrid, N: int, seed=None) -> PointCloud:
    """Pick a cell from q, then a uniform position inside it.

    Cells and offsets come from two separate streams, so for a fixed seed
    the first N points do not depend on how many are drawn.
    """
    if N < 2:
        raise TrajectoryError("N must be >= 2")
    rng = make_rng(seed)
    cell_rng, jitter_rng = (make_rng(int(v)) for v in rng.integers(0, 2 ** 63, size=2))
    cells = InverseCDF(q.flat)(cell_rng, N)
    corner = np.stack(np.unravel_index(cells, q.dims.shape), axis=1).astype(float)
    h = np.asarray(q.dims.dims, dtype=float)
    pts = (corner + jitter_rng.random(corner.shape)) / h
    return PointCloud(np.clip(pts, 0.0, 1.0), q,
                      int(seed) if isinstance(seed, (int, np.integer)) else None)


# -- TSP heuristic ------------------------------------------------------------


@numba.njit(cache=True)
def _dist(pts, a, b):
    s = 0.0
    for k in range(pts.shape[1]):
        t = pts[a, k] - pts[b, k]
        s += t * t
    return np.sqrt(s)


@numba.njit(cache=True)
def _nearest_neighbor_path(pts, start):
    n = pts.shape[0]
    visited = np.zeros(n, dtype=np.bool_)
    tour = np.empty(n, dtype=np.int64)
    cur = start
    visited[cur] = True
    tour[0] = cur
    for step in range(1, n):
        best = -1
        bestd = np.inf
        for j in range(n):
            if not visited[j]:
                dj = _dist(pts, cur, j)
                if dj < bestd:
                    bestd = dj
                    best = j
        visited[best] = True
        tour[step] = best
        cur = best
    return tour


@numba.njit(cache=True)
def _reversal_gain(pts, tour, i, j):
    """Length change from reversing tour[i..j] (open path, i <= j)."""
    n = tour.shape[0]
    delta = 0.0
    if i > 0:
        delta += _dist(pts, tour[i - 1], tour[j]) - _dist(pts, tour[i - 1], tour[i])
    if j < n - 1:
        delta += _dist(pts, tour[i], tour[j + 1]) - _dist(pts, tour[j], tour[j + 1])
    return delta


@numba.njit(cache=True)
def _reverse(tour, pos, i, j):
    while i < j:
        a = tour[i]
        b = tour[j]
        tour[i] = b
        tour[j] = a
        pos[b] = i
        pos[a] = j
        i += 1
        j -= 1


@numba.njit(cache=True)
def _two_opt(pts, tour, neigh, max_passes, eps):
    """First-improvement 2-opt over neighbour lists; prefix and suffix
    reversals let the path endpoints move.  Returns passes used."""
    n = tour.shape[0]
    pos = np.empty(n, dtype=np.int64)
    for k in range(n):
        pos[tour[k]] = k
    passes = 0
    improved = True
    while improved and passes < max_passes:
        improved = False
        passes += 1
        for a in range(n):
            for nb in range(neigh.shape[1]):
                c = neigh[a, nb]
                t = pos[a]
                u = pos[c]
                if u > t:
                    cand_i = (t + 1, t)
                    cand_j = (u, u - 1)
                else:
                    cand_i = (u + 1, u)
                    cand_j = (t, t - 1)
                for m in range(2):
                    i = cand_i[m]
                    j = cand_j[m]
                    if i >= j:
                        continue
                    if _reversal_gain(pts, tour, i, j) < -eps:
                        _reverse(tour, pos, i, j)
                        improved = True
                        break
    return passes


@numba.njit(cache=True)
def _or_opt(pts, tour, eps):
    """Move a chain of 1-3 cities (optionally reversed) to another edge or
    to either end of the path.  Returns True if anything improved."""
    n = tour.shape[0]
    any_gain = False
    improved = True
    while improved:
        improved = False
        for seg in range(1, 4):
            for i in range(0, n - seg + 1):
                j = i + seg - 1
                # cost of cutting tour[i..j] out and reconnecting the ends
                removed = 0.0
                if i > 0:
                    removed += _dist(pts, tour[i - 1], tour[i])
                if j < n - 1:
                    removed += _dist(pts, tour[j], tour[j + 1])
                if i > 0 and j < n - 1:
                    removed -= _dist(pts, tour[i - 1], tour[j + 1])
                rest = np.empty(n - seg, dtype=np.int64)
                r = 0
                for k in range(n):
                    if k < i or k > j:
                        rest[r] = tour[k]
                        r += 1
                chain = tour[i:j + 1].copy()
                best = -eps
                best_k = -2
                best_rev = False
                # insert between rest[k] and rest[k+1]; k = -1 front, k = n-seg-1 back
                for k in range(-1, n - seg):
                    for rev in range(2):
                        first = chain[seg - 1] if rev else chain[0]
                        last = chain[0] if rev else chain[seg - 1]
                        added = 0.0
                        if k >= 0:
                            added += _dist(pts, rest[k], first)
                        if k < n - seg - 1:
                            added += _dist(pts, last, rest[k + 1])
                        if k >= 0 and k < n - seg - 1:
                            added -= _dist(pts, rest[k], rest[k + 1])
                        gain = added - removed
                        if gain < best:
                            best = gain
                            best_k = k
                            best_rev = rev == 1
                if best_k > -2:
                    out = np.empty(n, dtype=np.int64)
                    w = 0
                    for k in range(-1, n - seg):
                        if k >= 0:
                            out[w] = rest[k]
                            w += 1
                        if k == best_k:
                            for q in range(seg):
                                out[w] = chain[seg - 1 - q] if best_rev else chain[q]
                                w += 1
                    tour[:] = out
                    improved = True
                    any_gain = True
                    break
            if improved:
                break
    return any_gain


def path_length(points, order) -> float:
    pts = np.asarray(points, dtype=float)[np.asarray(order)]
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def solve_tsp(cloud, effort: str = "2opt", max_passes: int = 1000,
              neighbors: int = NEIGHBORS, return_order: bool = False):
    """Open Hamiltonian path through the cloud.

    ``effort``: ``"nn"`` (nearest-neighbour construction from point 0),
    ``"2opt"`` (plus 2-opt over k-nearest candidate lists) or ``"2opt+oropt"``
    (alternating 2-opt and or-opt until neither improves).
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    n = pts.shape[0]
    if n < 2:
        raise TrajectoryError("need at least 2 points")
    pts = np.ascontiguousarray(pts)
    tour = _nearest_neighbor_path(pts, 0)
    if effort not in ("nn", "2opt", "2opt+oropt"):
        raise ValueError(f"unknown effort {effort!r}")
    if effort != "nn" and n > 2:
        k = min(neighbors, n - 1)
        _, neigh = cKDTree(pts).query(pts, k=k + 1)
        neigh = np.ascontiguousarray(neigh[:, 1:], dtype=np.int64)
        _two_opt(pts, tour, neigh, max_passes, GAIN_EPS)
        if effort == "2opt+oropt":
            while _or_opt(pts, tour, GAIN_EPS):
                _two_opt(pts, tour, neigh, max_passes, GAIN_EPS)
    traj = Trajectory(pts[tour])
    return (traj, tour) if return_order else traj


# -- parametrization and occupation --------------------------------------------


def parametrize_constant_speed(traj: Trajectory, t):
    """Point reached at fraction ``t`` of the total length (vectorized in t)."""
    total = traj.total_length
    if total <= 0:
        raise TrajectoryError("zero-length trajectory")
    t = np.asarray(t, dtype=float)
    s = np.clip(t, 0.0, 1.0) * total
    cum = traj.cumulative_length
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
    frac = (s - cum[k]) / (cum[k + 1] - cum[k])
    v = traj.vertices
    out = v[k] + frac[..., None] * (v[k + 1] - v[k])
    return out


def sample_curve(traj: Trajectory, step: float):
    """Equally spaced arc-length samples with spacing <= step.

    Returns (t, points) with t the normalized arc position.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    total = traj.total_length
    if total <= 0:
        raise TrajectoryError("zero-length trajectory")
    count = int(np.ceil(total / step)) + 1
    t = np.linspace(0.0, 1.0, count)
    return t, parametrize_constant_speed(traj, t)


def clip_to_cells(traj: Trajectory, shape):
    """Split every segment at the grid lines k/h of each axis.

    Returns (segment index, t0, t1, cell index, piece length) per piece,
    with t0 < t1 fractions along the segment and the cell taken at the
    piece midpoint.
    """
    h = np.asarray(shape, dtype=float)
    v = traj.vertices * h
    a, b = v[:-1], v[1:]
    nseg = len(a)
    seg_ids = [np.arange(nseg), np.arange(nseg)]
    ts = [np.zeros(nseg), np.ones(nseg)]
    for j in range(v.shape[1]):
        lo = np.minimum(a[:, j], b[:, j])
        hi = np.maximum(a[:, j], b[:, j])
        k0 = np.floor(lo) + 1
        k1 = np.ceil(hi) - 1
        cnt = np.maximum(k1 - k0 + 1, 0).astype(np.int64)
        if cnt.sum() == 0:
            continue
        sid = np.repeat(np.arange(nseg), cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        k = np.repeat(k0, cnt) + offs
        seg_ids.append(sid)
        ts.append((k - a[sid, j]) / (b[sid, j] - a[sid, j]))
    sid = np.concatenate(seg_ids)
    t = np.concatenate(ts)
    order = np.lexsort((t, sid))
    sid, t = sid[order], t[order]
    same = sid[:-1] == sid[1:]
    s, t0, t1 = sid[:-1][same], t[:-1][same], t[1:][same]
    seglen = np.diff(traj.cumulative_length)
    length = (t1 - t0) * seglen[s]
    keep = length > 0
    s, t0, t1, length = s[keep], t0[keep], t1[keep], length[keep]
    mid = a[s] + ((t0 + t1) / 2)[:, None] * (b[s] - a[s])
    idx = np.clip(np.floor(mid).astype(np.int64), 0, np.asarray(shape) - 1)
    cell = np.ravel_multi_index(tuple(idx.T), tuple(shape))
    return s, t0, t1, cell, length


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    """Relative curve length per cell of an h-per-axis grid of [0,1]^d."""

    h: tuple[int, ...]
    mass: np.ndarray = field(repr=False)

    @property
    def density(self) -> DensityGrid:
        return DensityGrid.from_weights(self.h, self.mass)

    def save(self, path) -> None:
        write_vdsg(path, self.mass)


def occupation_measure(traj: Trajectory, h) -> OccupationMeasure:
    """Exact per-cell curve length (segments clipped at grid lines) over total length."""
    shape = (int(h),) * traj.d if np.isscalar(h) else tuple(int(v) for v in h)
    if min(shape) < 1:
        raise ValueError("h must be >= 1")
    if traj.total_length <= 0:
        raise TrajectoryError("zero-length trajectory")
    _, _, _, cell, length = clip_to_cells(traj, shape)
    counts = np.bincount(cell, weights=length, minlength=int(np.prod(shape)))
    mass = counts.reshape(shape) / counts.sum()
    mass.setflags(write=False)
    return OccupationMeasure(shape, mass)


# -- regridding ---------------------------------------------------------------


def nearest_cells(samples, dims) -> np.ndarray:
    """Linear index of the nearest cell centre; ties go to the lower index."""
    dims = as_dims(dims)
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    h = np.asarray(dims.dims)
    idx = np.clip(np.ceil(x * h).astype(np.int64) - 1, 0, h - 1)
    return np.ravel_multi_index(tuple(idx.T), dims.shape).astype(np.int64)


def regrid_nearest(samples, dims, provenance: str = "TSP", omega1=(), params=None,
                   seed=None) -> SamplingScheme:
    """Snap curve samples to the grid; omega keeps first-visit order."""
    dims = as_dims(dims)
    log = nearest_cells(samples, dims)
    omega1 = np.asarray(omega1, dtype=np.int64)
    omega = unique_in_order(np.concatenate([omega1, log]))
    return SamplingScheme(dims, omega, omega1=omega1, draw_log=log, seed=seed,
                          provenance=provenance, params=dict(params or {}))


def grid_samples(traj: Trajectory, dims):
    """Curve samples used for regridding.

    Half-pixel arc-length samples, merged in arc order with the midpoint
    of every cell crossing so that short corner cuts are not missed.
    """
    dims = as_dims(dims)
    total = traj.total_length
    step = 0.5 / max(dims.dims)
    t_uniform, _ = sample_curve(traj, step)
    s, t0, t1, _, _ = clip_to_cells(traj, dims.shape)
    seglen = np.diff(traj.cumulative_length)
    t_mid = (traj.cumulative_length[s] + (t0 + t1) / 2 * seglen[s]) / total
    t = np.sort(np.concatenate([t_uniform, t_mid]))
    return t, parametrize_constant_speed(traj, t)


def trajectory_scheme(traj: Trajectory, dims, provenance: str, omega1=(),
                      params=None, seed=None) -> SamplingScheme:
    _, pts = grid_samples(traj, dims)
    return regrid_nearest(pts, dims, provenance, omega1, params, seed)


def tsp_trajectory(p: DensityGrid, N: int, seed=None, corrected: bool = True, omega1=(),
                   effort: str = "2opt") -> Trajectory:
    """Open TSP path through N cities drawn from p, or from its corrected
    density p^(d/(d-1)) when ``corrected``.  Cells in ``omega1`` get no cities."""
    omega1 = np.asarray(omega1, dtype=np.int64)
    q = p
    if omega1.size:
        w = p.flat.copy()
        w[omega1] = 0.0
        q = DensityGrid.from_weights(p.dims, w)
    if corrected:
        q = target_to_initial_density(q)
    return solve_tsp(draw_points(q, N, seed), effort)


def tsp_scheme(p: DensityGrid, N: int, seed=None, corrected: bool = True, omega1=(),
               effort: str = "2opt") -> SamplingScheme:
    """TSP trajectory regridded onto p's grid, united with ``omega1``."""
    traj = tsp_trajectory(p, N, seed, corrected, omega1, effort)
    return trajectory_scheme(traj, p.dims, "TSP", omega1,
                             {"N": int(N), "corrected": corrected, "length": traj.total_length},
                             int(seed) if isinstance(seed, (int, np.integer)) else None)


# -- Monte Carlo checks -------------------------------------------------------


@dataclass
class LimitDensityRow:
    N: int
    corrected: bool
    tv_to_target: float
    tv_to_limit: float


@dataclass
class LimitDensityReport:
    rows: list[LimitDensityRow]
    mean_occupation: dict = field(repr=False)
    slope: dict

    def tv_series(self, corrected: bool) -> list[float]:
        return [r.tv_to_target for r in self.rows if r.corrected == corrected]

    def to_dict(self) -> dict:
        return {"rows": [r.__dict__ for r in self.rows],
                "slope": {str(k): v for k, v in self.slope.items()}}


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float).ravel(), np.asarray(y, float).ravel()
    ok = (x > 0) & (y > 0)
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def mean_occupation(q: DensityGrid, N: int, trials: int, seed=0, effort: str = "2opt") -> np.ndarray:
    acc = np.zeros(q.dims.shape)
    for t in range(trials):
        cloud = draw_points(q, N, trial_seed(seed, t))
        acc += occupation_measure(solve_tsp(cloud, effort), q.dims.shape).mass
    return acc / trials


def verify_limit_density(p: DensityGrid, N_list, trials: int, seed=0,
                         modes=(True, False), effort: str = "2opt") -> LimitDensityReport:
    """Mean occupation of TSP curves through cities drawn from p (uncorrected)
    or from its corrected density, compared with p and with the limit
    density of the city law.  The slope is log-occupation against
    log-city-density across cells at the largest N."""
    d = p.dims.d
    rows, means, slopes = [], {}, {}
    for corrected in modes:
        q = target_to_initial_density(p, d) if corrected else p
        limit = limit_density(q, d)
        for N in N_list:
            occ = mean_occupation(q, N, trials, seed=trial_seed(seed, N), effort=effort)
            means[(corrected, N)] = occ
            rows.append(LimitDensityRow(int(N), corrected, tv_distance(occ, p.mass),
                                        tv_distance(occ, limit.mass)))
        slopes[corrected] = loglog_slope(q.mass, means[(corrected, N_list[-1])])
    return LimitDensityReport(rows, means, slopes)


def estimate_bhh_constant(d: int, N: int, trials: int, seed=0, effort: str = "2opt") -> float:
    """Mean of T(Y_N) / N^((d-1)/d) for uniform clouds on [0,1]^d."""
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")
    vals = []
    for t in range(trials):
        rng = make_rng(trial_seed(seed, t))
        traj = solve_tsp(rng.random((N, d)), effort)
        vals.append(traj.total_length / N ** ((d - 1) / d))
    return float(np.mean(vals))


# -- trajectory CSV -----------------------------------------------------------

AXIS_NAMES = ("x", "y", "z")


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """Vertices with their normalized arc position t, header ``t,x,y[,z]``."""
    t = traj.cumulative_length / traj.total_length
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *AXIS_NAMES[:traj.d]])
        for ti, v in zip(t, traj.vertices):
            w.writerow([repr(float(ti)), *(repr(float(c)) for c in v)])


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return Trajectory(np.array([[float(c) for c in r[1:]] for r in rows[1:]]))
