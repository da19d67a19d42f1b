"""Synthetic world generation and drive simulation."""

import math

import numpy as np
import pytest

from mapkeeper.core import FeatureKind, Pose2
from mapkeeper.localization import DrivableAreas
from mapkeeper.simulator import (
    ChangeEvent,
    DetectorConfig,
    DriveConfig,
    Occluder,
    WorldConfig,
    WorldFeature,
    WorldTimeline,
    build_initial_map,
    detection_probability,
    generate_trajectory,
    generate_world,
    sense,
    sightline_blocked,
    simulate_drive,
)


def _world_feature(fid, position, height, kind=FeatureKind.POLE, born=0, died=None):
    geom = 0.2 if kind is FeatureKind.POLE else 90.0
    return WorldFeature(id=fid, position=position, kind=kind, height=height,
                        geom_param=geom, label="lamp", born_week=born, died_week=died)


def _sure_detector(**kwargs):
    # no thinning, no measurement noise: sense() output becomes exact
    return DetectorConfig(p_near=1.0, p_far=1.0, sigma_obs=0.0, sigma_height=0.0,
                          **kwargs)


def test_alive_window():
    f = _world_feature(0, (0.0, 0.0), 3.0, born=3, died=7)
    assert [f.alive(w) for w in (2, 3, 6, 7, 8)] == [False, True, True, False, False]
    forever = _world_feature(1, (0.0, 0.0), 3.0, born=2)
    assert forever.alive(100)
    assert not forever.alive(1)


def test_detection_probability_profile():
    cfg = DetectorConfig(max_range=30.0, near_range=20.0, p_near=0.9, p_far=0.5)
    assert detection_probability(5.0, cfg) == 0.9
    assert detection_probability(20.0, cfg) == 0.9
    assert detection_probability(25.0, cfg) == pytest.approx(0.7)
    assert detection_probability(30.0, cfg) == pytest.approx(0.5)
    assert detection_probability(30.01, cfg) == 0.0


def test_sense_height_gate_is_strict():
    det = _sure_detector()
    thr = det.height_thresholds[FeatureKind.POLE]
    world = WorldTimeline(
        features=[
            _world_feature(0, (10.0, 0.0), thr),         # exactly at the gate
            _world_feature(1, (10.0, 3.0), thr + 0.01),
        ],
        route=[(0.0, 0.0), (1.0, 0.0)],
    )
    obs = sense(world, 0, Pose2(0.0, 0.0, 0.0), 0.0, det, np.random.default_rng(0))
    assert len(obs) == 1
    assert obs[0].position_local == pytest.approx((10.0, 3.0))


def test_sense_range_gates():
    det = _sure_detector()
    world = WorldTimeline(
        features=[
            _world_feature(0, (0.3, 0.0), 3.0),    # too close to resolve
            _world_feature(1, (10.0, 0.0), 3.0),
            _world_feature(2, (30.5, 0.0), 3.0),   # beyond max_range
        ],
        route=[(0.0, 0.0), (1.0, 0.0)],
    )
    obs = sense(world, 0, Pose2(0.0, 0.0, 0.0), 0.0, det, np.random.default_rng(0))
    assert [o.position_local[0] for o in obs] == pytest.approx([10.0])


def test_sense_respects_lifetimes():
    det = _sure_detector()
    world = WorldTimeline(
        features=[_world_feature(0, (10.0, 0.0), 3.0, born=2, died=5)],
        route=[(0.0, 0.0), (1.0, 0.0)],
    )
    seen = [
        len(sense(world, w, Pose2(0.0, 0.0, 0.0), 0.0, det, np.random.default_rng(0)))
        for w in (1, 2, 4, 5)
    ]
    assert seen == [0, 1, 1, 0]


def test_sightline_blocked_at_exact_height():
    # box entered at 40% of the way to a 4 m feature: the sightline
    # passes 1.6 m above the ground there
    occ = [Occluder(center=(5.0, 0.0), width=2.0, depth=2.0, height=1.6)]
    assert sightline_blocked((0.0, 0.0), (10.0, 0.0), 4.0, occ, 0.0)
    low = [Occluder(center=(5.0, 0.0), width=2.0, depth=2.0, height=1.59)]
    assert not sightline_blocked((0.0, 0.0), (10.0, 0.0), 4.0, low, 0.0)


def test_sightline_ignores_irrelevant_occluders():
    behind = [Occluder(center=(15.0, 0.0), width=2.0, depth=2.0, height=5.0)]
    assert not sightline_blocked((0.0, 0.0), (10.0, 0.0), 4.0, behind, 0.0)
    aside = [Occluder(center=(5.0, 6.0), width=2.0, depth=2.0, height=5.0)]
    assert not sightline_blocked((0.0, 0.0), (10.0, 0.0), 4.0, aside, 0.0)


def test_sightline_tracks_moving_occluder():
    occ = [Occluder(center=(5.0, 0.0), width=2.0, depth=2.0, height=2.0,
                    velocity=(0.0, 1.0))]
    assert sightline_blocked((0.0, 0.0), (10.0, 0.0), 4.0, occ, 0.0)
    # ten seconds later the box has slid 10 m off the sightline
    assert not sightline_blocked((0.0, 0.0), (10.0, 0.0), 4.0, occ, 10.0)


def test_trajectory_spacing_and_lap_count():
    route = [(0.0, 0.0), (160.0, 0.0), (160.0, 100.0), (0.0, 100.0)]
    poses = generate_trajectory(route, speed=8.0, dt=0.5, laps=1)
    assert len(poses) == 130  # perimeter 520 m at 4 m steps
    assert len(generate_trajectory(route, speed=8.0, dt=0.5, laps=2)) == 260
    step = 8.0 * 0.5
    for a, b in zip(poses, poses[1:]):
        d = math.hypot(b.x - a.x, b.y - a.y)
        if a.heading == b.heading:  # same segment: exact arclength step
            assert d == pytest.approx(step)
        else:
            assert d <= step + 1e-9


def test_trajectory_phase_shifts_start():
    route = [(0.0, 0.0), (160.0, 0.0), (160.0, 100.0), (0.0, 100.0)]
    poses = generate_trajectory(route, speed=8.0, dt=0.5, phase=2.5)
    assert poses[0].x == pytest.approx(2.5)
    assert poses[0].y == pytest.approx(0.0)


def test_trajectory_rejects_bad_params():
    route = [(0.0, 0.0), (10.0, 0.0)]
    with pytest.raises(ValueError):
        generate_trajectory(route, speed=0.0, dt=0.5)
    with pytest.raises(ValueError):
        generate_trajectory(route, speed=8.0, dt=-1.0)


def _small_world_config():
    return WorldConfig(
        n_features=30, route_length=80.0, route_width=50.0,
        band_min=2.0, band_max=12.0, min_separation=3.0,
        events=[ChangeEvent(week=3, deaths=5, center=(40.0, 0.0))],
    )


def test_generate_world_is_deterministic():
    w1 = generate_world(_small_world_config(), seed=6)
    w2 = generate_world(_small_world_config(), seed=6)
    assert [f.position for f in w1.features] == [f.position for f in w2.features]
    assert [f.kind for f in w1.features] == [f.kind for f in w2.features]
    assert [f.height for f in w1.features] == [f.height for f in w2.features]


def test_generate_world_geometry():
    cfg = _small_world_config()
    world = generate_world(cfg, seed=6)
    assert len(world.features) == 30
    pts = [f.position for f in world.features]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1])
            assert d >= cfg.min_separation


def test_death_event_retires_nearest():
    world = generate_world(_small_world_config(), seed=6)
    dead = [f for f in world.features if f.died_week == 3]
    assert len(dead) == 5
    center = (40.0, 0.0)
    worst_dead = max(math.hypot(f.position[0] - center[0], f.position[1] - center[1])
                     for f in dead)
    for f in world.features:
        if f.died_week is None:
            d = math.hypot(f.position[0] - center[0], f.position[1] - center[1])
            assert d >= worst_dead - 1e-9
    assert not dead[0].alive(3)
    assert dead[0].alive(2)


def test_birth_event_adds_features():
    cfg = _small_world_config()
    cfg.events = [ChangeEvent(week=2, births=4, center=(40.0, 25.0), radius=40.0)]
    world = generate_world(cfg, seed=6)
    born = [f for f in world.features if f.born_week == 2]
    assert len(born) == 4
    assert all(not f.alive(1) and f.alive(2) for f in born)
    assert len(world.features) == 34
    for f in born:
        assert math.hypot(f.position[0] - 40.0, f.position[1] - 25.0) <= 40.0


def test_build_initial_map_applies_height_gate():
    cfg = _small_world_config()
    world = generate_world(cfg, seed=6)
    det = DetectorConfig()
    prior = build_initial_map(world, det, DriveConfig())
    expected = {
        wf.id for wf in world.alive(0)
        if wf.height > det.height_thresholds[wf.kind]
    }
    assert set(prior.features) == expected
    assert 0 < len(expected) < len(world.features)  # the gate must bite
    some = prior.features[next(iter(expected))]
    assert sum(1 for r in some.visibility.ranges if r > 0.0) > 0


def test_equal_seeds_give_identical_drives():
    world = generate_world(_small_world_config(), seed=6)
    det = DetectorConfig()
    drv = DriveConfig(speed=8.0, dt=0.5, fix_every=5)
    a = simulate_drive(world, 1, det, drv, seed=9)
    b = simulate_drive(world, 1, det, drv, seed=9)
    assert _signature(a) == _signature(b)
    c = simulate_drive(world, 2, det, drv, seed=9)
    assert _signature(a) != _signature(c)


def _signature(log):
    rows = []
    for st in log:
        rows.append((
            st.t,
            st.odometry_delta,
            st.global_fix,
            st.speed,
            tuple((o.position_local, o.kind.value, o.height) for o in st.observations),
            st.points3d.tobytes(),
        ))
    return rows


def test_fix_cadence():
    world = generate_world(_small_world_config(), seed=6)
    log = simulate_drive(world, 0, DetectorConfig(), DriveConfig(fix_every=5), seed=9)
    for k, st in enumerate(log):
        assert (st.global_fix is not None) == (k % 5 == 0)
