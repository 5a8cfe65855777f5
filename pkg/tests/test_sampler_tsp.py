import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vdsample.density import DensityGrid, polynomial_density
from vdsample.empirical import tv_distance
from vdsample.sampler_tsp import (OccupationMeasure, PointCloud, Trajectory, TrajectoryError,
                                  draw_points, estimate_bhh_constant, grid_samples,
                                  limit_density, mean_occupation, nearest_cells,
                                  occupation_measure, parametrize_constant_speed, path_length,
                                  read_trajectory_csv, regrid_nearest, sample_curve, solve_tsp,
                                  target_to_initial_density, trajectory_scheme, tsp_scheme,
                                  verify_limit_density, write_trajectory_csv)


def _brute_force_length(pts):
    n = len(pts)
    D = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    perms = np.array(list(itertools.permutations(range(n))))
    perms = perms[perms[:, 0] < perms[:, -1]]  # a path and its reverse have equal length
    return D[perms[:, :-1], perms[:, 1:]].sum(axis=1).min()


def test_correction_examples():
    p = DensityGrid((2,), [1 / 3, 2 / 3])
    np.testing.assert_allclose(target_to_initial_density(p, 2).flat, [0.2, 0.8])
    r = 2 * math.sqrt(2)
    np.testing.assert_allclose(target_to_initial_density(p, 3).flat, [1 / (1 + r), r / (1 + r)])
    u = DensityGrid.uniform((4, 4))
    np.testing.assert_allclose(target_to_initial_density(u).flat, u.flat)
    with pytest.raises(TrajectoryError):
        target_to_initial_density(DensityGrid.uniform((4,)))


@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3]))
def test_correction_inverts_limit(seed, d):
    w = np.random.default_rng(seed).random((4, 4)) + 1e-3
    p = DensityGrid.from_weights((4, 4), w)
    np.testing.assert_allclose(limit_density(target_to_initial_density(p, d), d).mass, p.mass,
                               rtol=1e-12)


def test_points_in_point_mass_cell():
    w = np.zeros((4, 4))
    w[1, 2] = 1
    cloud = draw_points(DensityGrid((4, 4), w), 500, seed=0)
    assert np.all((cloud.points[:, 0] >= 0.25) & (cloud.points[:, 0] <= 0.5))
    assert np.all((cloud.points[:, 1] >= 0.5) & (cloud.points[:, 1] <= 0.75))


def test_uniform_points_binomial_bands():
    N = 10 ** 5
    cloud = draw_points(DensityGrid.uniform((4, 4)), N, seed=1)
    cells = nearest_cells(cloud.points, (4, 4))
    counts = np.bincount(cells, minlength=16)
    assert np.all(np.abs(counts - N / 16) < 3 * math.sqrt(N / 16 * 15 / 16))


def test_points_histogram_converges():
    q = polynomial_density((8, 8), 2)
    tvs = [tv_distance(np.bincount(nearest_cells(draw_points(q, N, seed=2).points, (8, 8)),
                                   minlength=64) / N, q.flat) for N in (100, 10 ** 3, 10 ** 4, 10 ** 5)]
    assert all(b < a for a, b in zip(tvs, tvs[1:]))


def test_points_prefix_consistent():
    q = polynomial_density((8, 8), 1)
    a = draw_points(q, 50, seed=9).points
    b = draw_points(q, 80, seed=9).points
    np.testing.assert_array_equal(a, b[:50])


def test_point_cloud_invariants():
    with pytest.raises(TrajectoryError):
        PointCloud(np.array([[0.5, 0.5]]))
    with pytest.raises(TrajectoryError):
        PointCloud(np.array([[0.5, 0.5], [1.2, 0.0]]))


def test_collinear_points():
    pts = np.array([[0.5, 0.5], [0.1, 0.5], [0.9, 0.5]])
    traj = solve_tsp(pts)
    assert traj.total_length == pytest.approx(0.8)
    np.testing.assert_allclose(np.sort(traj.vertices[:, 0]) if traj.vertices[0, 0] < 0.5
                               else np.sort(traj.vertices[:, 0])[::-1], traj.vertices[:, 0])


def test_square_corners():
    pts = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    assert _brute_force_length(pts) == pytest.approx(3.0)
    assert solve_tsp(pts).total_length == pytest.approx(3.0)


def test_small_instances_match_brute_force():
    rng = np.random.default_rng(2024)
    exact = 0
    for _ in range(100):
        pts = rng.random((8, 2))
        best = _brute_force_length(pts)
        got = solve_tsp(pts, effort="2opt+oropt").total_length
        assert got >= best - 1e-12
        exact += got <= best + 1e-9
    assert exact >= 90


def test_two_opt_never_worse_than_nn():
    rng = np.random.default_rng(5)
    for N in (10, 100, 1000):
        pts = rng.random((N, 2))
        traj, order = solve_tsp(pts, "2opt", return_order=True)
        assert sorted(order.tolist()) == list(range(N))
        assert traj.total_length == pytest.approx(path_length(pts, order))
        assert traj.total_length <= solve_tsp(pts, "nn").total_length + 1e-12
        assert solve_tsp(pts, "2opt+oropt").total_length <= traj.total_length + 1e-12


def test_constant_speed_parametrization():
    traj = Trajectory(np.array([[0.0, 0.0], [0.6, 0.0], [0.6, 0.4]]))
    np.testing.assert_allclose(parametrize_constant_speed(traj, 0.0), [0, 0])
    np.testing.assert_allclose(parametrize_constant_speed(traj, 1.0), [0.6, 0.4])
    np.testing.assert_allclose(parametrize_constant_speed(traj, 0.3), [0.3, 0.0])
    seg = Trajectory(np.array([[0.1, 0.2], [0.5, 0.8]]))
    np.testing.assert_allclose(parametrize_constant_speed(seg, 0.5), [0.3, 0.5])
    point = Trajectory(np.array([[0.1, 0.1], [0.1, 0.1]]))
    assert point.total_length == 0
    with pytest.raises(TrajectoryError):
        parametrize_constant_speed(point, 0.5)


def test_sample_curve_spacing():
    rng = np.random.default_rng(6)
    traj = Trajectory(rng.random((10, 2)))
    step = 0.013
    t, pts = sample_curve(traj, step)
    arc_steps = np.diff(t) * traj.total_length
    assert arc_steps.max() <= step + 1e-12
    assert abs(arc_steps.sum() - traj.total_length) <= step
    # chords never exceed the arc between consecutive samples
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    assert np.all(chords <= arc_steps + 1e-12)


def test_trajectory_invariants():
    traj = Trajectory(np.array([[0, 0], [0.5, 0], [0.5, 0], [0.5, 0.5]], dtype=float))
    assert traj.cumulative_length[0] == 0
    assert np.all(np.diff(traj.cumulative_length) > 0)
    assert traj.total_length == pytest.approx(1.0)
    assert traj.scaled(0.5).total_length == pytest.approx(0.5)


def test_occupation_examples():
    inside = occupation_measure(Trajectory(np.array([[0.1, 0.1], [0.2, 0.3]])), 2)
    np.testing.assert_array_equal(inside.mass, [[1, 0], [0, 0]])
    split = occupation_measure(Trajectory(np.array([[0.25, 0.1], [0.75, 0.1]])), 2)
    np.testing.assert_allclose(split.mass, [[0.5, 0], [0.5, 0]])


def _dense_sampling_occupation(traj, h, step=1e-4):
    # midpoints of tiny equal arcs, binned by floor
    count = int(np.ceil(traj.total_length / step))
    t = (np.arange(count) + 0.5) / count
    pts = parametrize_constant_speed(traj, t)
    idx = np.clip(np.floor(pts * h).astype(int), 0, h - 1)
    return np.bincount(idx[:, 0] * h + idx[:, 1], minlength=h * h).reshape(h, h) / count


def test_occupation_matches_dense_sampling():
    rng = np.random.default_rng(7)
    for _ in range(5):
        traj = Trajectory(rng.random((10, 2)))
        occ = occupation_measure(traj, 8)
        assert occ.mass.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.abs(occ.mass - _dense_sampling_occupation(traj, 8)).max() < 1e-3


def test_occupation_save(tmp_path):
    from vdsample.grid import read_vdsg
    occ = occupation_measure(Trajectory(np.random.default_rng(1).random((6, 2))), (4, 8))
    assert isinstance(occ, OccupationMeasure)
    occ.save(tmp_path / "o.vdsg")
    np.testing.assert_array_equal(read_vdsg(tmp_path / "o.vdsg"), occ.mass)
    assert occ.density.dims.dims == (4, 8)


def test_regrid_center_and_tie():
    assert nearest_cells([[0.375, 0.625]], (4, 4)).tolist() == [1 * 4 + 2]
    # x = 0.5 sits between rows 1 and 2 -> row 1; y = 0.25 between cols 0 and 1 -> col 0
    assert nearest_cells([[0.5, 0.25]], (4, 4)).tolist() == [4]
    assert nearest_cells([[0.0, 1.0]], (4, 4)).tolist() == [3]
    s = regrid_nearest([[0.9, 0.9], [0.1, 0.1], [0.9, 0.9]], (4, 4))
    assert s.omega.tolist() == [15, 0]
    assert s.draw_log.tolist() == [15, 0, 15]


def test_regrid_covers_occupation_support():
    rng = np.random.default_rng(8)
    for _ in range(20):
        traj = Trajectory(rng.random((12, 2)))
        occ = occupation_measure(traj, 16)
        scheme = trajectory_scheme(traj, (16, 16), "TSP")
        assert set(np.flatnonzero(occ.mass.ravel() > 0)) <= set(scheme.omega.tolist())
        t, _ = grid_samples(traj, (16, 16))
        assert np.all(np.diff(t) >= 0)


def test_tsp_scheme_respects_omega1():
    p = polynomial_density((16, 16), 2)
    s = tsp_scheme(p, 100, seed=3, omega1=[0, 1, 2])
    assert s.omega[:3].tolist() == [0, 1, 2]
    assert s.provenance == "TSP" and s.params["N"] == 100
    assert tsp_scheme(p, 100, seed=3, omega1=[0, 1, 2]) == s


def test_uniform_occupation_is_uniform():
    u = DensityGrid.uniform((8, 8))
    for corrected in (True, False):
        q = target_to_initial_density(u) if corrected else u
        assert tv_distance(mean_occupation(q, 2000, 3, seed=1), u.mass) < 0.05


def test_corrected_limit_tv_decreasing():
    p = polynomial_density((16, 16), 2)
    rep = verify_limit_density(p, [500, 2000, 8000], trials=5, seed=0, modes=(True,))
    tv = rep.tv_series(True)
    assert tv[0] > tv[1] > tv[2]
    assert tv[2] < 0.1


def test_bhh_estimates():
    vals = [estimate_bhh_constant(2, N, trials, seed=1) for N, trials in ((100, 5), (1000, 5), (10000, 2))]
    assert (max(vals) - min(vals)) / np.mean(vals) < 0.1
    assert 0.6 < vals[-1] < 0.8


def test_length_scales_linearly():
    pts = np.random.default_rng(4).random((200, 2))
    full = solve_tsp(pts)
    half = solve_tsp(pts / 2)
    assert half.total_length == pytest.approx(full.total_length / 2, rel=1e-12)


def test_trajectory_csv_round_trip(tmp_path):
    traj = Trajectory(np.random.default_rng(3).random((7, 3)))
    write_trajectory_csv(tmp_path / "t.csv", traj)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,x,y,z"
    np.testing.assert_array_equal(read_trajectory_csv(tmp_path / "t.csv").vertices, traj.vertices)
