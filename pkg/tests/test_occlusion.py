"""Obstacle grid construction and ray casting against a brute-force oracle."""

import math

import numpy as np
import pytest

from mapkeeper.occlusion import ObstacleGrid, build_obstacle_grid, is_occluded, ray_cast


def brute_force_scan(occupied, extent, max_range, step=0.01):
    """Walk each of the 360 rays in `step` increments and report the
    distance of the first sample landing in an occupied cell.

    Independent of the production line-walk: pure sampling. Can skip a
    cell the ray barely clips, so agreement is only expected to within
    one cell diagonal.
    """
    n = occupied.shape[0]
    cell = extent / n
    half = extent / 2.0
    t = np.arange(step, max_range + step, step)
    ranges = np.full(360, max_range)
    for b in range(360):
        theta = math.radians(b)
        x = t * math.cos(theta)
        y = t * math.sin(theta)
        ix = np.floor((x + half) / cell).astype(int)
        iy = np.floor((y + half) / cell).astype(int)
        inside = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
        hit = np.zeros(len(t), dtype=bool)
        hit[inside] = occupied[ix[inside], iy[inside]]
        idx = np.argmax(hit)
        if hit[idx]:
            ranges[b] = t[idx]
    return ranges


def random_grid(rng, n=40, extent=20.0, p=0.08):
    grid = ObstacleGrid(extent=extent, n_cells=n)
    grid.occupied = rng.random((n, n)) < p
    # the ray origin cell must stay clear
    grid.occupied[n // 2, n // 2] = False
    return grid


def random_wall_grid(rng, n=41, extent=20.0):
    """Random full-span axis-aligned walls, clear around the origin.

    Walls have no corners inside sensor range, so every ray that grazes
    a cell seam inside a wall lands in more wall right after. Isolated
    random cells do not have that property: a ray clipping a lone cell
    corner with a chord shorter than the sampling step is invisible to
    the stepping oracle, and the comparison would be unbounded there.
    """
    grid = ObstacleGrid(extent=extent, n_cells=n)
    c = n // 2
    for _ in range(1 + int(rng.integers(0, 4))):
        off = int(rng.integers(0, n - 1))
        while abs(off - c) <= 2:
            off = int(rng.integers(0, n - 1))
        thick = int(rng.integers(1, 3))
        if rng.random() < 0.5:
            grid.occupied[off:off + thick, :] = True
        else:
            grid.occupied[:, off:off + thick] = True
    return grid


def test_ray_cast_matches_stepping_oracle():
    rng = np.random.default_rng(7)
    diag = (20.0 / 41) * math.sqrt(2.0)
    for _ in range(40):
        grid = random_wall_grid(rng)
        scan = ray_cast(grid, max_range=9.0)
        oracle = brute_force_scan(grid.occupied, grid.extent, 9.0)
        assert np.max(np.abs(scan.ranges - oracle)) <= diag


def test_ray_cast_empty_grid_reaches_max_range():
    grid = ObstacleGrid(extent=20.0, n_cells=40)
    scan = ray_cast(grid, max_range=8.0)
    assert np.all(scan.ranges == 8.0)
    assert scan.max_range == 8.0


def test_ray_cast_single_wall():
    # wall of occupied cells at x in [4, 4.5), spanning all y
    grid = ObstacleGrid(extent=20.0, n_cells=40)
    grid.occupied[28, :] = True
    scan = ray_cast(grid, max_range=10.0)
    # the ray origin sits a hair off center, hence the loose epsilon
    assert scan.ranges[0] == pytest.approx(4.0, abs=1e-6)
    # behind the vehicle there is nothing
    assert scan.ranges[180] == 10.0
    # at 45 degrees the wall is sqrt(2) farther
    assert scan.ranges[45] == pytest.approx(4.0 * math.sqrt(2.0), abs=0.8)


def test_ray_ranges_shrink_when_obstacles_added():
    rng = np.random.default_rng(3)
    grid = random_grid(rng, p=0.04)
    before = ray_cast(grid, max_range=10.0).ranges.copy()
    extra = rng.random(grid.occupied.shape) < 0.05
    extra[grid.n_cells // 2, grid.n_cells // 2] = False
    grid.occupied |= extra
    after = ray_cast(grid, max_range=10.0).ranges
    assert np.all(after <= before + 1e-12)


def test_is_occluded_monotone_under_added_obstacles():
    rng = np.random.default_rng(11)
    targets = [(float(r * math.cos(a)), float(r * math.sin(a)))
               for r, a in zip(rng.uniform(1, 9, 50), rng.uniform(-math.pi, math.pi, 50))]
    grid = random_grid(rng, p=0.03)
    scan = ray_cast(grid, max_range=10.0)
    visible_before = [not is_occluded(scan, p) for p in targets]
    extra = rng.random(grid.occupied.shape) < 0.08
    extra[grid.n_cells // 2, grid.n_cells // 2] = False
    grid.occupied |= extra
    scan2 = ray_cast(grid, max_range=10.0)
    for p, was_visible in zip(targets, visible_before):
        if is_occluded(scan, p):
            # occlusion never clears by adding obstacles
            assert is_occluded(scan2, p)


def test_is_occluded_beyond_max_range():
    grid = ObstacleGrid(extent=20.0, n_cells=40)
    scan = ray_cast(grid, max_range=5.0)
    assert is_occluded(scan, (6.0, 0.0))
    assert not is_occluded(scan, (4.0, 0.0))


def test_is_occluded_tolerance_spares_near_boundary():
    grid = ObstacleGrid(extent=20.0, n_cells=40)
    grid.occupied[28, 20] = True  # cell starting at x = 4.0 on the +x axis
    scan = ray_cast(grid, max_range=10.0)
    # feature just past the obstacle entry: inside the one-cell tolerance
    assert not is_occluded(scan, (4.3, 0.0))
    # feature well behind the obstacle
    assert is_occluded(scan, (7.0, 0.0))


def test_build_obstacle_grid_height_spread():
    # two distinct z values in one cell: occupied only when spread > th_gm
    pts = [(1.2, 1.2, 0.0), (1.3, 1.3, 0.5)]
    grid = build_obstacle_grid(pts, extent=20.0, n_cells=40, th_gm=0.3)
    assert grid.occupied.sum() == 1
    grid = build_obstacle_grid(pts, extent=20.0, n_cells=40, th_gm=0.6)
    assert grid.occupied.sum() == 0
    # a single return has zero spread and never occupies
    grid = build_obstacle_grid([(1.2, 1.2, 5.0)], extent=20.0, n_cells=40, th_gm=0.3)
    assert grid.occupied.sum() == 0


def test_build_obstacle_grid_ignores_outside_points():
    pts = [(50.0, 0.0, 0.0), (50.0, 0.0, 2.0)]
    grid = build_obstacle_grid(pts, extent=20.0, n_cells=40, th_gm=0.3)
    assert grid.occupied.sum() == 0


def test_build_obstacle_grid_rejects_non_finite():
    with pytest.raises(ValueError):
        build_obstacle_grid([(math.nan, 0.0, 0.0)], extent=20.0, n_cells=40)


def test_build_obstacle_grid_empty_input():
    grid = build_obstacle_grid(np.zeros((0, 3)), extent=20.0, n_cells=40)
    assert grid.occupied.sum() == 0
