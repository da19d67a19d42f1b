"""Campaign loop: drive, localize, update layers, maintain, report.

A campaign replays one drive per week over a changing world. Each step
localizes against the prior map, updates the sensor-model grid and the
per-feature visibility records, and feeds unmatched detections to the
candidate layer. At the maintenance cadence the candidate layer is
consolidated into the map and transient features are purged, producing
one report row per week.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .core import DriveLog, FeatureKind, PriorMap, to_global, to_vehicle
from .localization import DrivableAreas, FilterState, check_reset, correct_fix, correct_match, predict
from .matcher import IcpConfig, icp_align, retrieve_local
from .mapio import save_map, save_new_features, save_report, save_sensor_grid
from .new_features import (
    NewFeatureMap,
    cluster_candidates,
    expire_stale,
    optimize_positions,
    select_and_merge,
)
from .occlusion import build_obstacle_grid, ray_cast
from .sensor_model import SensorModelGrid
from .simulator import WorldTimeline, build_initial_map, generate_world, simulate_drive
from .visibility import purge_transient, update_visibility


# largest match correction (m) after which the pose still counts as settled
# for the purpose of collecting map evidence at that step
SETTLED_CORRECTION = 0.3


@dataclass
class DriveStats:
    resets: int = 0
    strong_corrections: int = 0
    rmse: float = 0.0
    matched_total: int = 0


@dataclass
class CampaignResult:
    prior: PriorMap
    new_map: NewFeatureMap
    sensor_grid: SensorModelGrid
    report: list[dict] = field(default_factory=list)
    world: WorldTimeline | None = None
    # (week, added feature ids, removed feature ids) per maintenance cycle
    events: list[tuple[int, list[int], list[int]]] = field(default_factory=list)
    # position each feature had when merged into the map
    added_positions: dict[int, tuple[float, float]] = field(default_factory=dict)


def run_drive(
    prior: PriorMap,
    new_map: NewFeatureMap,
    sensor_grid: SensorModelGrid,
    areas: DrivableAreas,
    log: DriveLog,
    scenario: ScenarioConfig,
    week: int,
) -> DriveStats:
    """Process one drive log against the current map layers."""
    state = FilterState()
    icp_cfg = IcpConfig(match_gate=scenario.maintenance.icp_gate)
    stats = DriveStats()
    sq_err = []

    for step in log.steps:
        if not state.initialized:
            if step.global_fix is not None:
                state.try_initialize(step.global_fix, step.speed, scenario.filter)
            continue

        predict(state, step.odometry_delta, scenario.filter)
        if step.global_fix is not None:
            correct_fix(state, step.global_fix, scenario.filter)

        scan = None
        if len(step.points3d):
            grid = build_obstacle_grid(
                step.points3d,
                extent=sensor_grid.extent,
                n_cells=scenario.grid.n_cells,
                th_gm=scenario.grid.th_gm,
            )
            scan = ray_cast(grid, max_range=scenario.detector.max_range)

        retrieved = retrieve_local(prior, state.pose, scenario.maintenance.retrieve_radius)
        match = None
        settled = True
        if retrieved and step.observations:
            match = icp_align(
                [to_global(state.pose, o.position_local) for o in step.observations],
                [f.position for f in retrieved],
                obs_kinds=[o.kind for o in step.observations],
                map_kinds=[f.kind for f in retrieved],
                map_ids=[f.id for f in retrieved],
                config=icp_cfg,
            )
            info = correct_match(state, match, scenario.filter)
            if info.is_strong(scenario.filter.lateral_threshold):
                stats.strong_corrections += 1
            if info.applied:
                moved = math.hypot(info.delta_longitudinal, info.delta_lateral)
                settled = moved <= SETTLED_CORRECTION

        if check_reset(state, areas):
            stats.resets += 1
            state.reset()
            continue

        if step.true_pose is not None:
            sq_err.append(
                (state.pose.x - step.true_pose.x) ** 2 + (state.pose.y - step.true_pose.y) ** 2
            )

        matched_ids = set()
        matched_obs = set()
        if match is not None:
            matched_ids = {fid for fid, _ in match.matched}
            matched_obs = {i for _, i in match.matched}
            stats.matched_total += len(match.matched)

        pose = state.pose
        for obs in step.observations:
            sensor_grid.update_cell(obs.position_local, obs.kind, detected=True)

        # Absence evidence and candidate ingestion need a trusted pose: either
        # the scan associated with the map, or there was no map to disagree
        # with. An unconverged match means the estimate is off by more than
        # the gate; a large correction means it was off until this step.
        # Either way, evidence gathered against that pose would poison the
        # layers (purge good features, stage badly placed candidates).
        if match is not None and not (match.converged and settled):
            continue

        for feat in retrieved:
            if feat.id not in matched_ids:
                sensor_grid.update_cell(
                    to_vehicle(pose, feat.position), feat.kind, detected=False
                )
        for feat in retrieved:
            if feat.id in matched_ids:
                update_visibility(feat, pose, True, sensor_grid)
            else:
                update_visibility(feat, pose, False, sensor_grid, scan)

        unmatched = [
            obs for i, obs in enumerate(step.observations) if i not in matched_obs
        ]
        new_map.ingest_unmatched(pose, unmatched, drive_id=week)

    if sq_err:
        stats.rmse = math.sqrt(float(np.mean(sq_err)))
    return stats


def replay_drive(
    prior: PriorMap,
    areas: DrivableAreas,
    log: DriveLog,
    scenario: ScenarioConfig,
) -> DriveStats:
    """Localize a stored log against a map without touching it.

    Runs on deep copies of the layers, so the same log can be scored
    against successive map versions to compare them.
    """
    snapshot = copy.deepcopy(prior)
    grid = SensorModelGrid(
        extent=scenario.grid.extent,
        cell_size=scenario.grid.cell_size,
        l_hit=scenario.grid.l_hit,
        l_miss=scenario.grid.l_miss,
        clamp=scenario.grid.clamp,
    )
    return run_drive(snapshot, NewFeatureMap(), grid, areas, log, scenario, week=0)


def maintain(
    prior: PriorMap, new_map: NewFeatureMap, scenario: ScenarioConfig
) -> tuple[list[int], list[int]]:
    """One maintenance cycle: consolidate candidates, then purge."""
    m = scenario.maintenance
    cluster_candidates(new_map, link=m.cluster_link, max_std=m.cluster_sigma)
    optimize_positions(new_map)
    added = select_and_merge(
        new_map,
        prior,
        min_distance=m.min_distance,
        ratio_cutoff=m.ratio_cutoff,
        retrieve_radius=m.retrieve_radius,
        duplicate_radius=m.duplicate_radius,
    )
    expire_stale(new_map, max_age=m.candidate_max_age)
    removed = purge_transient(prior, th_vis=m.th_vis)
    if removed:
        prior.version += 1
    return added, removed


def run_campaign(
    scenario: ScenarioConfig,
    out_dir: str | Path | None = None,
    world: WorldTimeline | None = None,
) -> CampaignResult:
    """Drive the full multi-week loop and return the final layers.

    A pre-built world may be supplied; otherwise one is generated from
    the scenario. When `out_dir` is given, the final map layers and the
    weekly report are written there.
    """
    if world is None:
        world = generate_world(scenario.world, scenario.seed)
    initial_detector = scenario.detector_for_week(0)
    prior = build_initial_map(world, initial_detector, scenario.drive)
    new_map = NewFeatureMap(ingest_gate=scenario.maintenance.icp_gate)
    sensor_grid = SensorModelGrid(
        extent=scenario.grid.extent,
        cell_size=scenario.grid.cell_size,
        l_hit=scenario.grid.l_hit,
        l_miss=scenario.grid.l_miss,
        clamp=scenario.grid.clamp,
    )
    report: list[dict] = []
    events: list[tuple[int, list[int], list[int]]] = []
    added_positions: dict[int, tuple[float, float]] = {}

    for week in range(1, scenario.weeks + 1):
        detector = scenario.detector_for_week(week)
        log = simulate_drive(world, week, detector, scenario.drive, scenario.seed)
        stats = run_drive(prior, new_map, sensor_grid, world.drivable, log, scenario, week)

        added: list[int] = []
        removed: list[int] = []
        if week % scenario.cadence == 0:
            added, removed = maintain(prior, new_map, scenario)
            events.append((week, added, removed))
            for fid in added:
                added_positions[fid] = prior.features[fid].position

        thresholds = scenario.thresholds_for_week(week)
        report.append(
            {
                "week": week,
                "height_pole": thresholds[FeatureKind.POLE],
                "height_corner": thresholds[FeatureKind.CORNER],
                "resets": stats.resets,
                "added": len(added),
                "removed": len(removed),
                "total_features": len(prior.features),
                "strong_corrections": stats.strong_corrections,
                "rmse": round(stats.rmse, 6),
            }
        )

    result = CampaignResult(
        prior=prior,
        new_map=new_map,
        sensor_grid=sensor_grid,
        report=report,
        world=world,
        events=events,
        added_positions=added_positions,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_map(prior, out / "prior_map.json")
        save_new_features(new_map, out / "new_features.json")
        save_sensor_grid(sensor_grid, out / "sensor_grid.json")
        save_report(report, out / "report.csv")
    return result
