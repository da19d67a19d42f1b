"""Rigid alignment and data association."""

import math

import numpy as np
import pytest

from mapkeeper.core import Feature, FeatureKind, Pose2, PriorMap, VisibilityRecord
from mapkeeper.matcher import IcpConfig, icp_align, retrieve_local


def _apply(transform, pts):
    tx, ty, theta = transform
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return pts @ rot.T + np.array([tx, ty])


def _spread_points(rng, count=5, radius=2.5, min_sep=2.0):
    """Points inside a disk, pairwise at least min_sep apart.

    Greedy placement can wall itself in, so the whole set restarts
    after too many rejections.
    """
    while True:
        pts = []
        for _ in range(300):
            p = rng.uniform(-radius, radius, 2)
            if np.hypot(*p) > radius:
                continue
            if all(np.linalg.norm(p - q) >= min_sep for q in pts):
                pts.append(p)
                if len(pts) == count:
                    return np.array(pts)


def test_identity_alignment():
    pts = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 5.0], [-3.0, -2.0]])
    result = icp_align(pts, pts)
    assert result.converged
    assert result.mean_residual == pytest.approx(0.0, abs=1e-12)
    assert result.transform == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)
    assert len(result.matched) == 4
    assert result.unmatched_map == []
    assert result.unmatched_obs == []


def test_recovers_known_offsets():
    # noiseless observations displaced by up to 0.5 m and 10 degrees;
    # the rotation acts about the origin, so points stay within the
    # disk or the displacement would blow past the match gate
    rng = np.random.default_rng(42)
    for _ in range(100):
        map_pts = _spread_points(rng)
        tx, ty = rng.uniform(-0.35, 0.35, 2)
        theta = math.radians(float(rng.uniform(-10, 10)))
        # observations are the map displaced by the inverse transform
        c, s = math.cos(theta), math.sin(theta)
        inv_rot = np.array([[c, s], [-s, c]])
        obs = (map_pts - np.array([tx, ty])) @ inv_rot.T
        result = icp_align(obs, map_pts)
        assert result.converged
        assert len(result.matched) == len(map_pts)
        assert result.transform[0] == pytest.approx(tx, abs=1e-3)
        assert result.transform[1] == pytest.approx(ty, abs=1e-3)
        assert result.transform[2] == pytest.approx(theta, abs=1e-3)
        assert result.mean_residual < 1e-6


def test_residual_history_non_increasing():
    rng = np.random.default_rng(3)
    for _ in range(100):
        map_pts = _spread_points(rng, count=6, radius=3.0)
        tx, ty = rng.uniform(-0.3, 0.3, 2)
        theta = float(rng.uniform(-0.15, 0.15))
        c, s = math.cos(theta), math.sin(theta)
        inv_rot = np.array([[c, s], [-s, c]])
        obs = (map_pts - np.array([tx, ty])) @ inv_rot.T
        obs = obs + rng.normal(0.0, 0.05, obs.shape)
        result = icp_align(obs, map_pts)
        hist = result.residual_history
        assert hist, "alignment found no pairs"
        assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
        assert result.mean_residual == hist[-1]


def test_kind_aware_pairing():
    map_pts = [(0.0, 0.0), (0.3, 0.0)]
    kinds = [FeatureKind.POLE, FeatureKind.CORNER]
    obs = [(0.3, 0.0)]
    # a pole observation must skip the nearby corner and take the pole
    result = icp_align(obs, map_pts, obs_kinds=[FeatureKind.POLE],
                       map_kinds=kinds, map_ids=[10, 11])
    assert result.matched == [(10, 0)]
    assert result.unmatched_map == [11]


def test_pairing_is_one_to_one():
    # two observations near one map point: only one may pair with it
    map_pts = [(0.0, 0.0), (10.0, 0.0)]
    obs = [(0.1, 0.0), (-0.1, 0.0)]
    result = icp_align(obs, map_pts, config=IcpConfig(max_iter=1, match_gate=1.0))
    map_ids = [m for m, _ in result.matched]
    obs_ids = [o for _, o in result.matched]
    assert len(set(map_ids)) == len(map_ids)
    assert len(set(obs_ids)) == len(obs_ids)
    assert len(result.matched) == 1


def test_unmatched_partition_is_complete():
    rng = np.random.default_rng(9)
    map_pts = _spread_points(rng, count=6)
    obs = np.vstack([map_pts[:4] + 0.05, [[50.0, 50.0]]])
    result = icp_align(obs, map_pts, map_ids=list(range(100, 106)))
    matched_map = {m for m, _ in result.matched}
    matched_obs = {o for _, o in result.matched}
    assert matched_map | set(result.unmatched_map) == set(range(100, 106))
    assert matched_obs | set(result.unmatched_obs) == set(range(len(obs)))
    assert 2 not in matched_obs or 4 not in matched_obs  # the outlier stays out
    assert 4 in result.unmatched_obs


def test_gate_rejects_distant_pairs():
    result = icp_align([(0.0, 0.0)], [(5.0, 0.0)], config=IcpConfig(match_gate=1.0))
    assert result.matched == []
    assert not result.converged
    assert result.mean_residual == math.inf


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        icp_align([], [(0.0, 0.0)])
    with pytest.raises(ValueError):
        icp_align([(0.0, 0.0)], [])


def _map_with(positions):
    m = PriorMap()
    for i, p in enumerate(positions):
        m.add(Feature(id=i, position=p, kind=FeatureKind.POLE, height=2.0,
                      geom_param=0.2, visibility=VisibilityRecord.empty()))
    return m


def test_retrieve_local_radius():
    m = _map_with([(0.0, 0.0), (30.0, 0.0), (0.0, 50.0)])
    pose = Pose2(0.0, 0.0, 0.0)
    got = {f.id for f in retrieve_local(m, pose, radius=40.0)}
    assert got == {0, 1}
    got = {f.id for f in retrieve_local(m, pose, radius=10.0)}
    assert got == {0}
    with pytest.raises(ValueError):
        retrieve_local(m, pose, radius=0.0)
