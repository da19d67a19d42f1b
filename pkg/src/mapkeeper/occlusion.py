"""2.5D obstacle grid and 2D ray casting for line-of-sight checks.

3D points (vehicle frame) are binned into a square grid; a cell is an
obstacle when the spread between its highest and lowest point exceeds
``th_gm``. A 360-ray cast from the grid center then yields a scan-like
range per degree, against which feature positions are compared to
decide whether a non-detected feature was simply hidden.

Ray traversal is an exact grid line-walk (every pierced cell is
visited). Because the cell layout and ray origin are fixed, the cells
each ray pierces are precomputed once per grid geometry and reused for
every scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import to_polar

# Rays start a hair off the exact center, which for an even cell count
# sits on a cell corner where the walk would be ambiguous.
_ORIGIN_EPS = 1e-9


@dataclass
class RayScan:
    """Per-degree ranges to the first obstacle, like a 2D laser scan."""

    ranges: np.ndarray  # shape (360,), meters
    max_range: float
    cell_size: float


class ObstacleGrid:
    """Square height-spread occupancy grid centered on the vehicle."""

    def __init__(self, extent: float = 60.0, n_cells: int = 120, th_gm: float = 0.3):
        self.extent = float(extent)
        self.n_cells = int(n_cells)
        self.cell_size = self.extent / self.n_cells
        self.th_gm = float(th_gm)
        self.min_z = np.full((n_cells, n_cells), np.inf)
        self.max_z = np.full((n_cells, n_cells), -np.inf)
        self.occupied = np.zeros((n_cells, n_cells), dtype=bool)


def build_obstacle_grid(
    points3d,
    extent: float = 60.0,
    n_cells: int = 120,
    th_gm: float = 0.3,
) -> ObstacleGrid:
    """Bin 3D vehicle-frame points and mark cells with height spread > th_gm."""
    grid = ObstacleGrid(extent=extent, n_cells=n_cells, th_gm=th_gm)
    pts = np.asarray(points3d, dtype=float)
    if pts.size == 0:
        return grid
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite 3D points")
    half = extent / 2.0
    ix = np.floor((pts[:, 0] + half) / grid.cell_size).astype(int)
    iy = np.floor((pts[:, 1] + half) / grid.cell_size).astype(int)
    inside = (ix >= 0) & (ix < n_cells) & (iy >= 0) & (iy < n_cells)
    ix, iy, z = ix[inside], iy[inside], pts[inside, 2]
    np.minimum.at(grid.min_z, (ix, iy), z)
    np.maximum.at(grid.max_z, (ix, iy), z)
    grid.occupied = (grid.max_z - grid.min_z) > th_gm
    return grid


class _RayTable:
    """Precomputed cells pierced by each of the 360 rays, with entry distances."""

    def __init__(self, extent: float, n_cells: int, max_range: float):
        cell = extent / n_cells
        half = extent / 2.0
        per_ray_cells: list[list[int]] = []
        per_ray_dists: list[list[float]] = []
        for b in range(360):
            theta = math.radians(b)
            dx, dy = math.cos(theta), math.sin(theta)
            cells, dists = self._walk(dx, dy, cell, half, n_cells, max_range)
            per_ray_cells.append(cells)
            per_ray_dists.append(dists)
        width = max(len(c) for c in per_ray_cells)
        self.indices = np.zeros((360, width), dtype=np.int64)
        self.entry = np.full((360, width), np.inf)
        self.valid = np.zeros((360, width), dtype=bool)
        for b in range(360):
            k = len(per_ray_cells[b])
            self.indices[b, :k] = per_ray_cells[b]
            self.entry[b, :k] = per_ray_dists[b]
            self.valid[b, :k] = True

    @staticmethod
    def _walk(dx, dy, cell, half, n_cells, max_range):
        """Amanatides-Woo style walk from the grid center along (dx, dy)."""
        ox, oy = _ORIGIN_EPS, _ORIGIN_EPS
        ix = int(math.floor((ox + half) / cell))
        iy = int(math.floor((oy + half) / cell))
        step_x = 1 if dx > 0 else -1
        step_y = 1 if dy > 0 else -1
        # Distance along the ray to the next vertical / horizontal grid line.
        if dx != 0.0:
            nx = (ix + (step_x > 0)) * cell - half
            t_max_x = (nx - ox) / dx
            t_dx = cell / abs(dx)
        else:
            t_max_x, t_dx = math.inf, math.inf
        if dy != 0.0:
            ny = (iy + (step_y > 0)) * cell - half
            t_max_y = (ny - oy) / dy
            t_dy = cell / abs(dy)
        else:
            t_max_y, t_dy = math.inf, math.inf
        cells: list[int] = []
        dists: list[float] = []
        # The origin cell (the vehicle's own) is intentionally excluded.
        while True:
            if t_max_x < t_max_y:
                t = t_max_x
                ix += step_x
                t_max_x += t_dx
            else:
                t = t_max_y
                iy += step_y
                t_max_y += t_dy
            if t > max_range or not (0 <= ix < n_cells and 0 <= iy < n_cells):
                break
            cells.append(ix * n_cells + iy)
            dists.append(t)
        return cells, dists


_RAY_TABLES: dict[tuple[float, int, float], _RayTable] = {}


def _ray_table(extent: float, n_cells: int, max_range: float) -> _RayTable:
    key = (extent, n_cells, max_range)
    table = _RAY_TABLES.get(key)
    if table is None:
        table = _RayTable(extent, n_cells, max_range)
        _RAY_TABLES[key] = table
    return table


def ray_cast(grid: ObstacleGrid, max_range: float | None = None) -> RayScan:
    """Cast 360 rays from the grid center; range = entry distance into the
    first occupied cell, or max_range when the ray escapes clean."""
    if max_range is None:
        max_range = grid.extent / 2.0
    table = _ray_table(grid.extent, grid.n_cells, max_range)
    occ_flat = grid.occupied.reshape(-1)
    hits = occ_flat[table.indices] & table.valid
    any_hit = hits.any(axis=1)
    first = hits.argmax(axis=1)
    ranges = np.where(any_hit, table.entry[np.arange(360), first], max_range)
    return RayScan(ranges=ranges, max_range=max_range, cell_size=grid.cell_size)


def is_occluded(scan: RayScan, feature_local: tuple[float, float], tolerance: float | None = None) -> bool:
    """Line of sight from the vehicle to a vehicle-frame point blocked?

    Beyond the scan's max range the answer is unknowable and reported as
    occluded. The one-cell tolerance keeps features from being occluded
    by their own supporting structure.
    """
    rng, bin_idx = to_polar(feature_local)
    if rng > scan.max_range:
        return True
    if tolerance is None:
        tolerance = scan.cell_size
    return bool(scan.ranges[bin_idx] < rng - tolerance)
