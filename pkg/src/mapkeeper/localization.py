"""Pose filtering against the feature map, with divergence resets.

An extended Kalman filter over (x, y, heading). Odometry drives the
prediction; global position fixes and map-alignment transforms are
fused as corrections. The filter bootstraps its heading from two fixes
taken while the vehicle moves fast enough for the travel direction to
be trustworthy, and is reset whenever the estimate leaves the drivable
area, which is the observable symptom of divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Pose2, wrap_angle
from .matcher import MatchResult


@dataclass
class FilterConfig:
    sigma_odom_xy: float = 0.05  # translation noise per predict, meters
    sigma_odom_heading: float = 0.01  # radians per predict
    sigma_fix: float = 1.0  # global fix noise, meters
    sigma_icp_xy: float = 0.2
    sigma_icp_heading: float = math.radians(2.0)
    v_min: float = 3.0  # m/s; below this the travel direction is unreliable
    min_pairs: int = 3  # alignment needs this many pairs to correct
    lateral_threshold: float = 0.5  # meters; beyond this a correction is strong


@dataclass
class CorrectionInfo:
    applied: bool
    delta_longitudinal: float = 0.0
    delta_lateral: float = 0.0
    delta_heading: float = 0.0

    def is_strong(self, threshold: float) -> bool:
        """A correction that moves the pose sideways beyond the threshold.

        Sideways motion is what the vehicle cannot do on its own, so a
        large lateral component means the filter had genuinely drifted.
        """
        return self.applied and abs(self.delta_lateral) > threshold


class FilterState:
    """EKF state plus the bootstrap buffer used before initialization."""

    def __init__(self) -> None:
        self.pose: Pose2 | None = None
        self.cov = np.zeros((3, 3))
        self.initialized = False
        self._last_fix: tuple[float, float] | None = None

    def reset(self) -> None:
        self.pose = None
        self.cov = np.zeros((3, 3))
        self.initialized = False
        self._last_fix = None

    def try_initialize(
        self, fix: tuple[float, float], speed: float, config: FilterConfig
    ) -> bool:
        """Bootstrap from two consecutive fixes taken above `v_min`.

        The second fix becomes the position, the fix-to-fix direction
        the heading. Slow segments discard the buffer: at low speed the
        displacement between fixes is dominated by noise.
        """
        if speed <= config.v_min:
            self._last_fix = None
            return False
        if self._last_fix is None:
            self._last_fix = fix
            return False
        dx = fix[0] - self._last_fix[0]
        dy = fix[1] - self._last_fix[1]
        self._last_fix = fix
        if math.hypot(dx, dy) < 1e-6:
            return False
        self.pose = Pose2(fix[0], fix[1], math.atan2(dy, dx))
        self.cov = np.diag(
            [config.sigma_fix**2, config.sigma_fix**2, math.radians(10.0) ** 2]
        )
        self.initialized = True
        return True


def predict(state: FilterState, delta: tuple[float, float, float], config: FilterConfig) -> None:
    """Advance the pose by a vehicle-frame odometry increment."""
    if not state.initialized:
        return
    dx, dy, dtheta = delta
    p = state.pose
    c, s = math.cos(p.heading), math.sin(p.heading)
    state.pose = Pose2(
        p.x + c * dx - s * dy,
        p.y + s * dx + c * dy,
        p.heading + dtheta,
    )
    f = np.array(
        [
            [1.0, 0.0, -s * dx - c * dy],
            [0.0, 1.0, c * dx - s * dy],
            [0.0, 0.0, 1.0],
        ]
    )
    g = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    q = np.diag([config.sigma_odom_xy**2, config.sigma_odom_xy**2, config.sigma_odom_heading**2])
    state.cov = f @ state.cov @ f.T + g @ q @ g.T


def _ekf_update(state: FilterState, innovation: np.ndarray, h: np.ndarray, r: np.ndarray) -> np.ndarray:
    s_mat = h @ state.cov @ h.T + r
    k = state.cov @ h.T @ np.linalg.inv(s_mat)
    dx = k @ innovation
    p = state.pose
    state.pose = Pose2(p.x + dx[0], p.y + dx[1], p.heading + dx[2])
    state.cov = (np.eye(3) - k @ h) @ state.cov
    return dx


def correct_fix(state: FilterState, fix: tuple[float, float], config: FilterConfig) -> None:
    """Fuse a global position fix."""
    if not state.initialized:
        return
    h = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    r = np.eye(2) * config.sigma_fix**2
    nu = np.array([fix[0] - state.pose.x, fix[1] - state.pose.y])
    _ekf_update(state, nu, h, r)


def correct_match(state: FilterState, match: MatchResult, config: FilterConfig) -> CorrectionInfo:
    """Fuse a map-alignment transform as a pose measurement.

    The transform maps the projected observations onto the map, so
    applying it to the current estimate yields the measured pose. A
    single matched pair cannot observe rotation, so it is fused as a
    position-only measurement; pretending it confirms the current
    heading would collapse the heading covariance without information.
    Weak alignments (not converged, or too few pairs) are ignored.
    """
    if not state.initialized or not match.converged or len(match.matched) < config.min_pairs:
        return CorrectionInfo(applied=False)
    tx, ty, dtheta = match.transform
    p = state.pose
    c, s = math.cos(dtheta), math.sin(dtheta)
    zx = c * p.x - s * p.y + tx
    zy = s * p.x + c * p.y + ty
    if len(match.matched) >= 2:
        nu = np.array([zx - p.x, zy - p.y, wrap_angle(dtheta)])
        h = np.eye(3)
        r = np.diag(
            [config.sigma_icp_xy**2, config.sigma_icp_xy**2, config.sigma_icp_heading**2]
        )
    else:
        nu = np.array([zx - p.x, zy - p.y])
        h = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        r = np.diag([config.sigma_icp_xy**2, config.sigma_icp_xy**2])
    dx = _ekf_update(state, nu, h, r)
    ch, sh = math.cos(p.heading), math.sin(p.heading)
    return CorrectionInfo(
        applied=True,
        delta_longitudinal=ch * dx[0] + sh * dx[1],
        delta_lateral=-sh * dx[0] + ch * dx[1],
        delta_heading=float(dx[2]),
    )


def _on_segment(point: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> bool:
    cross = (b[0] - a[0]) * (point[1] - a[1]) - (b[1] - a[1]) * (point[0] - a[0])
    if cross != 0.0:
        return False
    return (
        min(a[0], b[0]) <= point[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= point[1] <= max(a[1], b[1])
    )


def _point_in_ring(point: tuple[float, float], ring: list[tuple[float, float]]) -> bool:
    """Even-odd ray crossing test; boundary points count as inside.

    The crossing rule alone misclassifies points on top edges and some
    corners, so edges are checked for containment explicitly first.
    """
    x, y = point
    inside = False
    n = len(ring)
    for i in range(n):
        if _on_segment(point, ring[i], ring[(i + 1) % n]):
            return True
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            t = (y - y1) / (y2 - y1)
            if x < x1 + t * (x2 - x1):
                inside = not inside
    return inside


@dataclass
class DrivableAreas:
    """Road-surface polygons, with optional holes (islands, medians)."""

    polygons: list[list[tuple[float, float]]] = field(default_factory=list)
    holes: list[list[tuple[float, float]]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.polygons = [p for p in self.polygons if len(p) >= 3]
        self.holes = [h for h in self.holes if len(h) >= 3]

    def contains(self, point: tuple[float, float]) -> bool:
        if not any(_point_in_ring(point, ring) for ring in self.polygons):
            return False
        return not any(_point_in_ring(point, ring) for ring in self.holes)


def check_reset(state: FilterState, areas: DrivableAreas) -> bool:
    """True when the estimate left the drivable area and must restart."""
    if not state.initialized or not areas.polygons:
        return False
    return not areas.contains((state.pose.x, state.pose.y))
