"""Synthetic worlds and drives for exercising the map-maintenance loop.

A world is a set of point features with birth and death weeks, a loop
route, box-shaped occluders, and the drivable road surface. Drives are
sampled deterministically from a seed: noisy odometry, periodic global
fixes, probabilistic feature detections with height gating and
line-of-sight occlusion, and 3D returns from occluder surfaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DriveLog,
    DriveStep,
    Feature,
    FeatureKind,
    Observation,
    Pose2,
    PriorMap,
    VisibilityRecord,
    to_vehicle,
    wrap_angle,
)
from .localization import DrivableAreas
from .visibility import seed_visibility

POLE_LABELS = ("lamp", "sign", "trunk")
CORNER_LABELS = ("building", "fence")


@dataclass
class WorldFeature:
    id: int
    position: tuple[float, float]
    kind: FeatureKind
    height: float
    geom_param: float
    label: str
    born_week: int = 0
    died_week: int | None = None

    def alive(self, week: int) -> bool:
        return self.born_week <= week and (self.died_week is None or week < self.died_week)


@dataclass
class Occluder:
    center: tuple[float, float]
    width: float  # x extent, meters
    depth: float  # y extent
    height: float
    velocity: tuple[float, float] = (0.0, 0.0)

    def position(self, t: float) -> tuple[float, float]:
        return (self.center[0] + self.velocity[0] * t, self.center[1] + self.velocity[1] * t)


@dataclass
class ChangeEvent:
    week: int
    births: int = 0
    deaths: int = 0
    center: tuple[float, float] | None = None
    radius: float = 30.0


@dataclass
class WorldTimeline:
    features: list[WorldFeature]
    route: list[tuple[float, float]]
    occluders: list[Occluder] = field(default_factory=list)
    drivable: DrivableAreas = field(default_factory=DrivableAreas)

    def alive(self, week: int) -> list[WorldFeature]:
        return [f for f in self.features if f.alive(week)]


@dataclass
class DetectorConfig:
    max_range: float = 30.0
    near_range: float = 20.0  # flat detection probability out to here
    p_near: float = 0.95
    p_far: float = 0.5  # probability at max_range
    sigma_obs: float = 0.05  # position noise per axis, meters
    sigma_height: float = 0.02
    height_thresholds: dict[FeatureKind, float] = field(
        default_factory=lambda: {FeatureKind.POLE: 1.6, FeatureKind.CORNER: 1.8}
    )


@dataclass
class DriveConfig:
    speed: float = 8.0  # m/s, constant along the route
    dt: float = 0.5
    laps: int = 1
    fix_every: int = 5  # steps between global fixes
    sigma_fix: float = 0.5
    sigma_odom_xy: float = 0.02
    sigma_odom_heading: float = 0.002
    drift: tuple[float, float, float] = (0.0, 0.0, 0.0)  # odometry bias per step
    clutter_rate: float = 0.0  # expected spurious detections per step
    route_jitter: float = 0.25  # per-drive lateral offset sigma, meters


@dataclass
class WorldConfig:
    n_features: int = 200
    route_length: float = 160.0
    route_width: float = 100.0
    road_half_width: float = 4.0
    band_min: float = 2.0  # feature offset from route centerline
    band_max: float = 18.0
    min_separation: float = 3.0
    pole_fraction: float = 0.6
    pole_height: tuple[float, float] = (1.2, 6.0)
    corner_height: tuple[float, float] = (1.2, 8.0)
    n_static_occluders: int = 0
    n_moving_occluders: int = 0
    occluder_height: tuple[float, float] = (0.5, 2.2)
    occluder_size: tuple[float, float] = (1.5, 5.0)
    events: list[ChangeEvent] = field(default_factory=list)


def detection_probability(distance: float, config: DetectorConfig) -> float:
    """Flat and high when near, decaying linearly out to the range limit."""
    if distance <= config.near_range:
        return config.p_near
    if distance <= config.max_range:
        span = config.max_range - config.near_range
        frac = (distance - config.near_range) / span
        return config.p_near + frac * (config.p_far - config.p_near)
    return 0.0


def _point_to_segment(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def _distance_to_route(p, route) -> float:
    n = len(route)
    return min(_point_to_segment(p, route[i], route[(i + 1) % n]) for i in range(n))


def _rectangle_route(length: float, width: float) -> list[tuple[float, float]]:
    return [(0.0, 0.0), (length, 0.0), (length, width), (0.0, width)]


def _expanded_ring(route, margin):
    xs = [p[0] for p in route]
    ys = [p[1] for p in route]
    return [
        (min(xs) - margin, min(ys) - margin),
        (max(xs) + margin, min(ys) - margin),
        (max(xs) + margin, max(ys) + margin),
        (min(xs) - margin, max(ys) + margin),
    ]


def _sample_positions(
    rng, route, band_min, band_max, min_sep, count, taken, within=None, max_tries=20000
):
    """Dart throwing in the band around the route; rejects crowded spots.

    `within` optionally restricts spots to a (center, radius) disk.
    """
    xs = [p[0] for p in route]
    ys = [p[1] for p in route]
    lo = (min(xs) - band_max, min(ys) - band_max)
    hi = (max(xs) + band_max, max(ys) + band_max)
    out = []
    tries = 0
    while len(out) < count and tries < max_tries:
        tries += 1
        p = (
            float(rng.uniform(lo[0], hi[0])),
            float(rng.uniform(lo[1], hi[1])),
        )
        d = _distance_to_route(p, route)
        if not (band_min <= d <= band_max):
            continue
        if within is not None and math.hypot(p[0] - within[0][0], p[1] - within[0][1]) > within[1]:
            continue
        if any(math.hypot(p[0] - q[0], p[1] - q[1]) < min_sep for q in taken + out):
            continue
        out.append(p)
    if len(out) < count:
        raise RuntimeError(f"could only place {len(out)} of {count} features")
    return out


def _make_feature(rng, fid, position, config: WorldConfig, born_week=0) -> WorldFeature:
    if rng.random() < config.pole_fraction:
        kind = FeatureKind.POLE
        height = float(rng.uniform(*config.pole_height))
        geom = float(rng.uniform(0.05, 0.29))
        label = str(rng.choice(POLE_LABELS))
    else:
        kind = FeatureKind.CORNER
        height = float(rng.uniform(*config.corner_height))
        geom = float(rng.uniform(80.0, 100.0))
        label = str(rng.choice(CORNER_LABELS))
    return WorldFeature(
        id=fid, position=position, kind=kind, height=height, geom_param=geom, label=label,
        born_week=born_week,
    )


def generate_world(config: WorldConfig, seed: int) -> WorldTimeline:
    """Deterministic world from a seed: features, occluders, change events.

    Death events retire the features nearest the event center; birth
    events dart-throw new ones inside the event radius. The drivable
    surface is the route ring widened by the road half-width.
    """
    rng = np.random.default_rng((seed, 0))
    route = _rectangle_route(config.route_length, config.route_width)
    positions = _sample_positions(
        rng, route, config.band_min, config.band_max, config.min_separation,
        config.n_features, [],
    )
    features = [_make_feature(rng, i, p, config) for i, p in enumerate(positions)]
    next_id = len(features)

    for event in sorted(config.events, key=lambda e: e.week):
        center = event.center
        if center is None:
            center = (config.route_length / 2.0, config.route_width / 2.0)
        if event.deaths:
            alive = [f for f in features if f.alive(event.week)]
            alive.sort(key=lambda f: math.hypot(f.position[0] - center[0], f.position[1] - center[1]))
            for f in alive[: event.deaths]:
                f.died_week = event.week
        if event.births:
            taken = [f.position for f in features]
            spots = _sample_positions(
                rng, route, config.band_min, config.band_max, config.min_separation,
                event.births, taken, within=(center, event.radius),
            )
            for p in spots:
                features.append(_make_feature(rng, next_id, p, config, born_week=event.week))
                next_id += 1

    occluders = []
    for i in range(config.n_static_occluders + config.n_moving_occluders):
        p = _sample_positions(
            rng, route, config.band_min, config.band_max, config.min_separation,
            1, [f.position for f in features] + [o.center for o in occluders],
        )[0]
        vel = (0.0, 0.0)
        if i >= config.n_static_occluders:
            ang = float(rng.uniform(0.0, 2.0 * math.pi))
            sp = float(rng.uniform(0.5, 2.0))
            vel = (sp * math.cos(ang), sp * math.sin(ang))
        occluders.append(
            Occluder(
                center=p,
                width=float(rng.uniform(*config.occluder_size)),
                depth=float(rng.uniform(*config.occluder_size)),
                height=float(rng.uniform(*config.occluder_height)),
                velocity=vel,
            )
        )

    drivable = DrivableAreas(
        polygons=[_expanded_ring(route, config.road_half_width)],
        holes=[_expanded_ring(route, -config.road_half_width)],
    )
    return WorldTimeline(features=features, route=route, occluders=occluders, drivable=drivable)


def generate_trajectory(
    route: list[tuple[float, float]],
    speed: float,
    dt: float,
    laps: int = 1,
    phase: float = 0.0,
) -> list[Pose2]:
    """Constant-speed poses along the closed route polyline.

    `phase` shifts the start point along the route so repeated drives
    do not sample the exact same arclengths.
    """
    if speed <= 0 or dt <= 0:
        raise ValueError("speed and dt must be > 0")
    segs = []
    n = len(route)
    for i in range(n):
        a, b = route[i], route[(i + 1) % n]
        segs.append((a, b, math.hypot(b[0] - a[0], b[1] - a[1])))
    perimeter = sum(s[2] for s in segs)
    step = speed * dt
    poses = []
    s = phase
    total = perimeter * laps + phase
    while s < total:
        d = s % perimeter
        for a, b, length in segs:
            if d <= length:
                t = d / length if length > 0 else 0.0
                heading = math.atan2(b[1] - a[1], b[0] - a[0])
                poses.append(
                    Pose2(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), heading)
                )
                break
            d -= length
        s += step
    return poses


def sightline_blocked(
    vehicle: tuple[float, float],
    feature_pos: tuple[float, float],
    feature_height: float,
    occluders: list[Occluder],
    t: float,
) -> bool:
    """Ground-level sensor check: an occluder hides the feature when its
    top edge rises above the sightline to the feature top.

    The sightline from the sensor (at the ground) to the feature top at
    crossing fraction f sits at height f * feature_height, so the
    feature is hidden iff the occluder is at least that tall.
    """
    dx = feature_pos[0] - vehicle[0]
    dy = feature_pos[1] - vehicle[1]
    for occ in occluders:
        cx, cy = occ.position(t)
        f = _segment_box_entry(
            vehicle, (dx, dy),
            (cx - occ.width / 2, cy - occ.depth / 2),
            (cx + occ.width / 2, cy + occ.depth / 2),
        )
        if f is None:
            continue
        if occ.height >= f * feature_height:
            return True
    return False


def _segment_box_entry(origin, direction, lo, hi):
    """Entry fraction of segment origin + s*direction, s in (0, 1), into the
    axis-aligned box, or None if it misses."""
    t0, t1 = 0.0, 1.0
    for axis in range(2):
        o, d = origin[axis], direction[axis]
        if abs(d) < 1e-12:
            if not (lo[axis] <= o <= hi[axis]):
                return None
            continue
        ta = (lo[axis] - o) / d
        tb = (hi[axis] - o) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return None
    if t0 <= 0.0 or t0 >= 1.0:
        return None
    return t0


def _occluder_points(occ: Occluder, pose: Pose2, t: float, max_range: float):
    """Boundary samples of the occluder box at the ground and at its top,
    in the vehicle frame."""
    cx, cy = occ.position(t)
    if math.hypot(cx - pose.x, cy - pose.y) > max_range + max(occ.width, occ.depth):
        return []
    spacing = 0.25
    pts = []
    hw, hd = occ.width / 2.0, occ.depth / 2.0
    nx = max(2, int(math.ceil(occ.width / spacing)) + 1)
    ny = max(2, int(math.ceil(occ.depth / spacing)) + 1)
    for i in range(nx):
        x = cx - hw + occ.width * i / (nx - 1)
        pts.append((x, cy - hd))
        pts.append((x, cy + hd))
    for j in range(1, ny - 1):
        y = cy - hd + occ.depth * j / (ny - 1)
        pts.append((cx - hw, y))
        pts.append((cx + hw, y))
    out = []
    for gx, gy in pts:
        lx, ly = to_vehicle(pose, (gx, gy))
        if math.hypot(lx, ly) <= max_range:
            out.append((lx, ly, 0.0))
            out.append((lx, ly, occ.height))
    return out


def sense(
    world: WorldTimeline,
    week: int,
    pose: Pose2,
    t: float,
    detector: DetectorConfig,
    rng: np.random.Generator,
) -> list[Observation]:
    """Detections from the true pose: range-limited, height-gated,
    occlusion-checked, then thinned by the detection probability."""
    obs = []
    for feat in world.alive(week):
        d = math.hypot(feat.position[0] - pose.x, feat.position[1] - pose.y)
        if d < 0.5 or d > detector.max_range:
            continue
        if not feat.height > detector.height_thresholds[feat.kind]:
            continue
        if sightline_blocked((pose.x, pose.y), feat.position, feat.height, world.occluders, t):
            continue
        if rng.random() >= detection_probability(d, detector):
            continue
        lx, ly = to_vehicle(pose, feat.position)
        obs.append(
            Observation(
                position_local=(
                    lx + float(rng.normal(0.0, detector.sigma_obs)),
                    ly + float(rng.normal(0.0, detector.sigma_obs)),
                ),
                kind=feat.kind,
                height=feat.height + float(rng.normal(0.0, detector.sigma_height)),
                geom_param=feat.geom_param,
                label=feat.label,
            )
        )
    return obs


def simulate_drive(
    world: WorldTimeline,
    week: int,
    detector: DetectorConfig,
    drive: DriveConfig,
    seed: int,
) -> DriveLog:
    """One deterministic drive around the route at the given week.

    Each week starts the lap at a random phase and drives a slightly
    different lane offset, so viewing geometry varies across weeks the
    way real repeated drives do.
    """
    rng = np.random.default_rng((seed, week, 1))
    phase = float(rng.uniform(0.0, drive.speed * drive.dt))
    lateral = float(rng.normal(0.0, drive.route_jitter))
    poses = [
        Pose2(
            p.x - math.sin(p.heading) * lateral,
            p.y + math.cos(p.heading) * lateral,
            p.heading,
        )
        for p in generate_trajectory(world.route, drive.speed, drive.dt, drive.laps, phase)
    ]
    log = DriveLog()
    for k, pose in enumerate(poses):
        t = k * drive.dt
        if k == 0:
            delta = (0.0, 0.0, 0.0)
            speed = drive.speed
        else:
            prev = poses[k - 1]
            c, s = math.cos(prev.heading), math.sin(prev.heading)
            gx, gy = pose.x - prev.x, pose.y - prev.y
            delta = (
                c * gx + s * gy + float(rng.normal(0.0, drive.sigma_odom_xy)) + drive.drift[0],
                -s * gx + c * gy + float(rng.normal(0.0, drive.sigma_odom_xy)) + drive.drift[1],
                wrap_angle(pose.heading - prev.heading)
                + float(rng.normal(0.0, drive.sigma_odom_heading))
                + drive.drift[2],
            )
            speed = math.hypot(gx, gy) / drive.dt
        fix = None
        if k % drive.fix_every == 0:
            fix = (
                pose.x + float(rng.normal(0.0, drive.sigma_fix)),
                pose.y + float(rng.normal(0.0, drive.sigma_fix)),
            )
        obs = sense(world, week, pose, t, detector, rng)
        if drive.clutter_rate > 0.0:
            for _ in range(int(rng.poisson(drive.clutter_rate))):
                ang = float(rng.uniform(-math.pi, math.pi))
                rad = float(rng.uniform(1.0, detector.max_range))
                kind = FeatureKind.POLE if rng.random() < 0.5 else FeatureKind.CORNER
                obs.append(
                    Observation(
                        position_local=(rad * math.cos(ang), rad * math.sin(ang)),
                        kind=kind,
                        height=float(rng.uniform(1.5, 3.0)),
                        geom_param=0.2 if kind is FeatureKind.POLE else 90.0,
                        label="",
                    )
                )
        points = []
        for occ in world.occluders:
            points.extend(_occluder_points(occ, pose, t, detector.max_range))
        log.append(
            DriveStep(
                t=t,
                odometry_delta=delta,
                observations=obs,
                points3d=np.array(points, dtype=float).reshape(-1, 3),
                speed=speed,
                global_fix=fix,
                true_pose=pose,
            )
        )
    return log


def build_initial_map(
    world: WorldTimeline,
    detector: DetectorConfig,
    drive: DriveConfig,
    n_bins: int = 360,
) -> PriorMap:
    """Prior map of the week-0 detectable features, with visibility
    records seeded from the route poses within sensor range."""
    prior = PriorMap()
    poses = generate_trajectory(world.route, drive.speed, drive.dt, drive.laps)
    for wf in world.alive(0):
        if not wf.height > detector.height_thresholds[wf.kind]:
            continue
        feat = Feature(
            id=wf.id,
            position=wf.position,
            kind=wf.kind,
            height=wf.height,
            geom_param=wf.geom_param,
            label_histogram={wf.label: 10},
            visibility=VisibilityRecord.empty(n_bins),
        )
        seed_visibility(feat, poses, max_range=detector.max_range)
        prior.add(feat)
    return prior
