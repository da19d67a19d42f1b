"""Per-feature visibility records and transience-based purging.

Every map feature keeps a polar record seen from itself: for each
angular bin, the farthest vehicle position from which the feature has
been perceived, and a detection log-odds. The volume enclosed by the
record, weighted by detection probability, measures how observable the
feature has been; a sharp drop of that volume after an update marks the
feature as transient.
"""

from __future__ import annotations

import math

from .core import Feature, Pose2, PriorMap, VisibilityRecord, to_polar, to_vehicle
from .occlusion import RayScan, is_occluded
from .sensor_model import SensorModelGrid, probability

# Log-odds magnitude assumed when the sensor grid has no information yet
# at the feature's cell; keeps first-contact updates from being no-ops.
MIN_LOGODDS_STEP = 0.1


def _logodds_step(grid: SensorModelGrid, feature: Feature, pose: Pose2) -> float:
    local = to_vehicle(pose, feature.position)
    step = abs(grid.query_logodds(local, feature.kind))
    if step < 1e-12:
        return MIN_LOGODDS_STEP
    return step


def update_visibility(
    feature: Feature,
    pose: Pose2,
    matched: bool,
    grid: SensorModelGrid,
    scan: RayScan | None = None,
) -> None:
    """Update one feature's visibility record from the current drive pose.

    The angular bin and range are those of the vehicle as seen from the
    feature. A matched feature extends the record when the vehicle is
    beyond the stored range; an unmatched feature shrinks it when the
    vehicle is inside the stored range, unless the sightline was
    occluded. The log-odds step is read from the sensor-model grid at
    the feature's position in the vehicle frame.
    """
    rel = (pose.x - feature.position[0], pose.y - feature.position[1])
    if abs(rel[0]) < 1e-12 and abs(rel[1]) < 1e-12:
        return
    rng, bin_idx = to_polar(rel, resolution_deg=360.0 / feature.visibility.n_bins)
    rec = feature.visibility
    stored = rec.ranges[bin_idx]
    if matched:
        if stored < rng:
            rec.ranges[bin_idx] = rng
            rec.logodds[bin_idx] += _logodds_step(grid, feature, pose)
    else:
        if scan is not None and is_occluded(scan, to_vehicle(pose, feature.position)):
            return
        if stored > rng:
            rec.ranges[bin_idx] = max(rng - 1.0, 0.0)
            rec.logodds[bin_idx] -= _logodds_step(grid, feature, pose)


def visibility_volume(record: VisibilityRecord) -> float:
    """Probability-weighted area swept by the record's range profile.

    Sum over bins of one half range squared times detection probability;
    the circular-sector area formula with unit angular bins.
    """
    total = 0.0
    for rng, lo in zip(record.ranges, record.logodds):
        total += 0.5 * rng * rng * probability(lo)
    return total


def purge_transient(prior_map: PriorMap, th_vis: float = 0.12) -> list[int]:
    """Remove features whose visibility volume collapsed since last check.

    Compares the current volume against the reference stored at the
    previous check and removes the feature when the relative drop
    exceeds `th_vis`. Features with no reference yet (fresh additions,
    or never-positive volumes) only get their reference seeded; they are
    never removed on their first evaluation.
    """
    removed = []
    for fid, feat in list(prior_map.features.items()):
        before = feat.visibility.volume_ref
        after = visibility_volume(feat.visibility)
        if before > 0.0:
            drop = (before - after) / before
            if drop > th_vis:
                prior_map.remove(fid)
                removed.append(fid)
                continue
        feat.visibility.volume_ref = after
    return removed


def seed_visibility(feature: Feature, poses: list[Pose2], max_range: float = 30.0) -> None:
    """Initialize a record as if the feature had been seen from `poses`.

    Used when promoting a candidate into the map: every pose within
    sensor range contributes its bin with a nominal detection log-odds.
    """
    rec = feature.visibility
    res = 360.0 / rec.n_bins
    for pose in poses:
        rel = (pose.x - feature.position[0], pose.y - feature.position[1])
        if abs(rel[0]) < 1e-12 and abs(rel[1]) < 1e-12:
            continue
        rng = math.hypot(*rel)
        if rng > max_range:
            continue
        _, bin_idx = to_polar(rel, resolution_deg=res)
        if rng > rec.ranges[bin_idx]:
            rec.ranges[bin_idx] = rng
        rec.logodds[bin_idx] += MIN_LOGODDS_STEP
