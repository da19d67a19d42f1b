"""Shared geometric and domain types plus frame transforms.

Conventions: world is 2D, poses are (x, y, heading) with heading in
(-pi, pi], feature heights are scalar attributes. The polar
discretization used for visibility bookkeeping and ray scans is
degree-based: bin = round(deg(atan2(-y, -x))) + 180, wrapped into
[0, 360). The atan2 is taken on the *negated* vector (target-to-origin
direction), which is the convention the visibility update uses for the
vehicle-to-feature geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]. Idempotent."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


@dataclass(frozen=True)
class Pose2:
    """2D pose: position in meters (global frame), heading in radians.

    Heading is normalized to (-pi, pi] on construction.
    """

    x: float
    y: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y}, {self.heading})")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


class FeatureKind(str, Enum):
    POLE = "pole"
    CORNER = "corner"


# Poles wider than this are rejected as features (walls, trunks of large
# trees etc. are not point-like enough for matching).
MAX_POLE_DIAMETER = 0.3


@dataclass
class VisibilityRecord:
    """Per-angle-bin visibility bookkeeping for one map feature.

    ``ranges[b]`` is the maximum range the feature was detected from at
    bin ``b``; ``logodds[b]`` is the accumulated detection log-odds for
    that bin. ``volume_ref`` stores the visibility volume at the last
    maintenance cycle, used as the reference for the purge ratio test.
    """

    ranges: list[float]
    logodds: list[float]
    volume_ref: float = 0.0

    @classmethod
    def empty(cls, n_bins: int = 360) -> "VisibilityRecord":
        return cls(ranges=[0.0] * n_bins, logodds=[0.0] * n_bins)

    @property
    def n_bins(self) -> int:
        return len(self.ranges)


@dataclass
class Feature:
    """A mapped landmark: pole or building corner reduced to a 2D point."""

    id: int
    position: tuple[float, float]
    kind: FeatureKind
    height: float
    geom_param: float  # pole diameter (m) or corner opening angle (rad)
    label_histogram: dict[str, int] = field(default_factory=dict)
    visibility: VisibilityRecord = field(default_factory=VisibilityRecord.empty)

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError(f"feature {self.id}: height must be > 0, got {self.height}")
        if self.kind is FeatureKind.POLE and not (0 < self.geom_param < MAX_POLE_DIAMETER):
            raise ValueError(
                f"feature {self.id}: pole diameter must be in (0, {MAX_POLE_DIAMETER}), "
                f"got {self.geom_param}"
            )
        if any(v < 0 for v in self.label_histogram.values()):
            raise ValueError(f"feature {self.id}: negative label count")

    def add_label(self, label: str, count: int = 1) -> None:
        self.label_histogram[label] = self.label_histogram.get(label, 0) + count


@dataclass(frozen=True)
class Observation:
    """A single detected feature in the vehicle frame."""

    position_local: tuple[float, float]
    kind: FeatureKind
    height: float
    geom_param: float
    label: str = ""

    def __post_init__(self):
        x, y = self.position_local
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite observation position ({x}, {y})")
        if self.height <= 0:
            raise ValueError(f"observation height must be > 0, got {self.height}")


class PriorMap:
    """The persistent localization map: features plus their visibility.

    Feature ids are unique; ``version`` increments by one at each
    maintenance cycle.
    """

    def __init__(self, angular_resolution_deg: float = 1.0, version: int = 1):
        if angular_resolution_deg <= 0 or (360.0 / angular_resolution_deg) % 1.0 != 0.0:
            raise ValueError(f"angular resolution must divide 360, got {angular_resolution_deg}")
        self.angular_resolution_deg = angular_resolution_deg
        self.version = version
        self.features: dict[int, Feature] = {}

    @property
    def n_bins(self) -> int:
        return int(round(360.0 / self.angular_resolution_deg))

    def add(self, feature: Feature) -> None:
        if feature.id in self.features:
            raise ValueError(f"duplicate feature id {feature.id}")
        if feature.visibility.n_bins != self.n_bins:
            raise ValueError(
                f"feature {feature.id}: visibility has {feature.visibility.n_bins} bins, "
                f"map uses {self.n_bins}"
            )
        self.features[feature.id] = feature

    def remove(self, feature_id: int) -> Feature:
        return self.features.pop(feature_id)

    def next_id(self) -> int:
        return max(self.features, default=0) + 1

    def __len__(self) -> int:
        return len(self.features)


@dataclass
class DriveStep:
    """One timestep of a drive log."""

    t: float
    odometry_delta: tuple[float, float, float]  # (dx, dy, dtheta), vehicle frame
    observations: list[Observation]
    points3d: list[tuple[float, float, float]]  # vehicle frame, for the obstacle grid
    speed: float
    global_fix: Optional[tuple[float, float, float]] = None  # (x, y, sigma)
    true_pose: Optional[Pose2] = None  # simulator ground truth only


class DriveLog:
    """Ordered per-timestep sensor stream for one drive."""

    def __init__(self):
        self.steps: list[DriveStep] = []

    def append(self, step: DriveStep) -> None:
        if self.steps and step.t <= self.steps[-1].t:
            raise ValueError(f"timestamps must be strictly increasing at t={step.t}")
        self.steps.append(step)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def to_global(pose: Pose2, p_local: tuple[float, float]) -> tuple[float, float]:
    """Rigid-body transform of a vehicle-frame point into the global frame."""
    x, y = p_local
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite point ({x}, {y})")
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    return (pose.x + c * x - s * y, pose.y + s * x + c * y)


def to_vehicle(pose: Pose2, p_global: tuple[float, float]) -> tuple[float, float]:
    """Inverse of :func:`to_global`."""
    x, y = p_global
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite point ({x}, {y})")
    dx, dy = x - pose.x, y - pose.y
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    return (c * dx + s * dy, -s * dx + c * dy)


def to_polar(p: tuple[float, float], resolution_deg: float = 1.0) -> tuple[float, int]:
    """Convert a relative point to (range, discretized angle bin).

    The bin follows the target-to-origin convention: the angle of the
    negated vector, in degrees, plus 180, rounded and wrapped into
    [0, n_bins). With the default 1 degree resolution this equals the
    direction of ``p`` itself in integer degrees in [0, 360).
    """
    x, y = p
    if x == 0.0 and y == 0.0:
        raise ValueError("polar conversion undefined for the zero vector")
    rng = math.hypot(x, y)
    n_bins = int(round(360.0 / resolution_deg))
    angle = math.atan2(-y, -x)
    disc = int(round((math.degrees(angle) + 180.0) / resolution_deg))
    return (rng, disc % n_bins)
