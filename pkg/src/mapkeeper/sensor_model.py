"""Vehicle-centered detectability grid (binary Bayes filter in log-odds).

The grid records, per feature kind, how likely the sensor system is to
detect a feature at each position relative to the vehicle. Every
detection adds ``l_hit`` to the corresponding cell, every misdetection
adds ``l_miss``; the cell value is the running log-odds of detection.
"""

from __future__ import annotations

import math

import numpy as np

from .core import FeatureKind


def probability(logodds: float) -> float:
    """Detection probability 1 - 1/(1 + e^l) for a log-odds value."""
    if logodds >= 0:
        return 1.0 / (1.0 + math.exp(-logodds))
    e = math.exp(logodds)
    return e / (1.0 + e)


def probability_array(logodds: np.ndarray) -> np.ndarray:
    """Vectorized :func:`probability`, overflow-safe for large |l|."""
    l = np.asarray(logodds, dtype=float)
    out = np.empty_like(l)
    pos = l >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-l[pos]))
    e = np.exp(l[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class SensorModelGrid:
    """Square log-odds grid centered on the vehicle, one layer per kind.

    Coordinates are vehicle-frame meters; the grid covers
    [-extent/2, extent/2) on both axes. Cell values are clamped to
    [-clamp, +clamp]; the magnitude doubles as the per-update step for
    visibility records, so the clamp bounds how hard a single
    misdetection can hit a feature's record.
    """

    def __init__(
        self,
        extent: float = 60.0,
        cell_size: float = 0.5,
        l_hit: float = 0.7,
        l_miss: float = -0.4,
        clamp: float = 2.0,
    ):
        n = extent / cell_size
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"extent {extent} not divisible by cell size {cell_size}")
        self.extent = float(extent)
        self.cell_size = float(cell_size)
        self.n_cells = int(round(n))
        self.l_hit = float(l_hit)
        self.l_miss = float(l_miss)
        self.clamp = float(clamp)
        self.logodds: dict[FeatureKind, np.ndarray] = {
            kind: np.zeros((self.n_cells, self.n_cells)) for kind in FeatureKind
        }
        self.skipped = 0  # out-of-extent update attempts
        self.oob_queries = 0

    def cell_index(self, p_local: tuple[float, float]) -> tuple[int, int] | None:
        """Grid indices for a vehicle-frame point, or None if outside."""
        half = self.extent / 2.0
        ix = math.floor((p_local[0] + half) / self.cell_size)
        iy = math.floor((p_local[1] + half) / self.cell_size)
        if 0 <= ix < self.n_cells and 0 <= iy < self.n_cells:
            return (ix, iy)
        return None

    def update_cell(self, p_local: tuple[float, float], kind: FeatureKind, detected: bool) -> None:
        idx = self.cell_index(p_local)
        if idx is None:
            self.skipped += 1
            return
        grid = self.logodds[kind]
        value = grid[idx] + (self.l_hit if detected else self.l_miss)
        grid[idx] = min(self.clamp, max(-self.clamp, value))

    def query_logodds(self, p_local: tuple[float, float], kind: FeatureKind) -> float:
        """Current cell log-odds; 0 (uninformative) outside the extent."""
        idx = self.cell_index(p_local)
        if idx is None:
            self.oob_queries += 1
            return 0.0
        return float(self.logodds[kind][idx])

    def contains(self, p_local: tuple[float, float]) -> bool:
        return self.cell_index(p_local) is not None
