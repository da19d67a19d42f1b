"""Candidate layer for features observed but absent from the prior map.

Unmatched observations accumulate here across drives. At maintenance
time the layer is clustered, each candidate's position is re-estimated
from its raw range-bearing measurements, and candidates that were
tracked over enough vehicle travel are either merged into the prior map
or discarded based on how isolated they are from existing features.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import Feature, FeatureKind, Pose2, PriorMap, VisibilityRecord, to_global, wrap_angle
from .visibility import seed_visibility


@dataclass
class CandidateObservation:
    pose: Pose2
    local: tuple[float, float]  # vehicle-frame position of the detection
    height: float
    geom_param: float
    label: str = ""

    @property
    def position_global(self) -> tuple[float, float]:
        return to_global(self.pose, self.local)


@dataclass
class CandidateFeature:
    kind: FeatureKind
    observations: list[CandidateObservation] = field(default_factory=list)
    position: tuple[float, float] = (0.0, 0.0)
    distance_by_drive: dict[int, float] = field(default_factory=dict)
    last_pose_by_drive: dict[int, Pose2] = field(default_factory=dict)
    age: int = 0  # maintenance cycles since creation

    @property
    def distance_travelled(self) -> float:
        """Longest single-drive travel while the candidate was in view."""
        return max(self.distance_by_drive.values(), default=0.0)

    def add(self, obs: CandidateObservation, drive_id: int) -> None:
        self.observations.append(obs)
        last = self.last_pose_by_drive.get(drive_id)
        if last is not None:
            self.distance_by_drive[drive_id] = self.distance_by_drive.get(
                drive_id, 0.0
            ) + math.hypot(obs.pose.x - last.x, obs.pose.y - last.y)
        else:
            self.distance_by_drive.setdefault(drive_id, 0.0)
        self.last_pose_by_drive[drive_id] = obs.pose
        pts = np.array([o.position_global for o in self.observations])
        self.position = (float(pts[:, 0].mean()), float(pts[:, 1].mean()))


@dataclass
class NewFeatureMap:
    candidates: dict[int, CandidateFeature] = field(default_factory=dict)
    next_id: int = 0
    ingest_gate: float = 1.0  # meters; association gate for new observations
    # diagnostics: (position, concentration ratio, reason) per rejected candidate
    discard_log: list[tuple[tuple[float, float], float, str]] = field(default_factory=list)

    def _new_candidate(self, kind: FeatureKind) -> int:
        cid = self.next_id
        self.next_id += 1
        self.candidates[cid] = CandidateFeature(kind=kind)
        return cid

    def ingest_unmatched(
        self,
        pose: Pose2,
        observations: list,
        drive_id: int,
    ) -> None:
        """Fold unmatched detections into the candidate layer.

        Each detection joins the nearest same-kind candidate within the
        gate, or starts a new candidate. Detections are `Observation`
        instances in the vehicle frame.
        """
        for obs in observations:
            g = to_global(pose, obs.position_local)
            best_id, best_d = None, self.ingest_gate
            for cid, cand in self.candidates.items():
                if cand.kind != obs.kind:
                    continue
                d = math.hypot(g[0] - cand.position[0], g[1] - cand.position[1])
                if d <= best_d:
                    best_id, best_d = cid, d
            if best_id is None:
                best_id = self._new_candidate(obs.kind)
            self.candidates[best_id].add(
                CandidateObservation(
                    pose=pose,
                    local=(float(obs.position_local[0]), float(obs.position_local[1])),
                    height=obs.height,
                    geom_param=obs.geom_param,
                    label=obs.label,
                ),
                drive_id,
            )


def _single_linkage(points: np.ndarray, link: float) -> list[list[int]]:
    """Clusters under single-linkage with the given link distance."""
    n = len(points)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(points[i] - points[j]) <= link:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def cluster_candidates(
    new_map: NewFeatureMap, link: float = 0.5, max_std: float = 0.15
) -> int:
    """Merge same-kind candidates that collapse into one tight cluster.

    Single-linkage groups candidate positions at `link` distance; a
    group is merged only when the pooled observations stay within
    `max_std` population standard deviation on each axis, so two
    genuinely distinct nearby features are left alone.
    Returns the number of merges performed.
    """
    merges = 0
    for kind in FeatureKind:
        ids = [cid for cid, c in new_map.candidates.items() if c.kind == kind]
        if len(ids) < 2:
            continue
        pts = np.array([new_map.candidates[cid].position for cid in ids])
        for group in _single_linkage(pts, link):
            if len(group) < 2:
                continue
            members = [new_map.candidates[ids[k]] for k in group]
            pooled = np.array(
                [o.position_global for c in members for o in c.observations]
            )
            if float(np.max(pooled.std(axis=0))) >= max_std:
                continue
            keep = members[0]
            for k, other in zip(group[1:], members[1:]):
                keep.observations.extend(other.observations)
                for d, dist in other.distance_by_drive.items():
                    keep.distance_by_drive[d] = max(
                        keep.distance_by_drive.get(d, 0.0), dist
                    )
                for d, p in other.last_pose_by_drive.items():
                    keep.last_pose_by_drive.setdefault(d, p)
                keep.age = max(keep.age, other.age)
                del new_map.candidates[ids[k]]
                merges += 1
            pooled = np.array([o.position_global for o in keep.observations])
            keep.position = (float(pooled[:, 0].mean()), float(pooled[:, 1].mean()))
    return merges


def optimize_position(
    observations: list[CandidateObservation],
    sigma_range: float = 0.1,
    sigma_bearing: float = math.radians(1.0),
    max_iter: int = 50,
    cost_eps: float = 1e-9,
) -> tuple[tuple[float, float], list[float]]:
    """Least-squares position from the raw range-bearing measurements.

    Gauss-Newton with step halving, started from the mean of the
    projected detections. Returns the estimate and the cost history,
    which is non-increasing by construction. Fewer than two observations
    fall back to the mean with an empty history.
    """
    pts = np.array([o.position_global for o in observations])
    guess = pts.mean(axis=0)
    if len(observations) < 2:
        return (float(guess[0]), float(guess[1])), []

    meas = []
    for o in observations:
        lx, ly = o.local
        meas.append((o.pose, math.hypot(lx, ly), math.atan2(ly, lx)))

    def residuals_jac(f):
        res = np.zeros(2 * len(meas))
        jac = np.zeros((2 * len(meas), 2))
        for i, (pose, r_meas, b_meas) in enumerate(meas):
            c, s = math.cos(pose.heading), math.sin(pose.heading)
            dx, dy = f[0] - pose.x, f[1] - pose.y
            lx = c * dx + s * dy
            ly = -s * dx + c * dy
            r = math.hypot(lx, ly)
            if r < 1e-9:
                r = 1e-9
            res[2 * i] = (r - r_meas) / sigma_range
            res[2 * i + 1] = wrap_angle(math.atan2(ly, lx) - b_meas) / sigma_bearing
            # rows of d(local)/d(f): the world-to-vehicle rotation
            jac[2 * i] = np.array([c * lx - s * ly, s * lx + c * ly]) / (r * sigma_range)
            jac[2 * i + 1] = np.array([-c * ly - s * lx, -s * ly + c * lx]) / (
                r * r * sigma_bearing
            )
        return res, jac

    f = guess.copy()
    res, jac = residuals_jac(f)
    cost = float(res @ res)
    history = [cost]
    for _ in range(max_iter):
        try:
            step = np.linalg.solve(jac.T @ jac, -jac.T @ res)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        improved = False
        for _ in range(20):
            trial = f + scale * step
            t_res, t_jac = residuals_jac(trial)
            t_cost = float(t_res @ t_res)
            if t_cost <= cost:
                f, res, jac, new_cost = trial, t_res, t_jac, t_cost
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
        history.append(new_cost)
        if cost - new_cost < cost_eps:
            cost = new_cost
            break
        cost = new_cost
    return (float(f[0]), float(f[1])), history


def optimize_positions(new_map: NewFeatureMap) -> None:
    for cand in new_map.candidates.values():
        cand.position, _ = optimize_position(cand.observations)


def concentration_ratio(
    position: tuple[float, float], prior_map: PriorMap, radius: float = 40.0
) -> float:
    """Largest neighbor distance over the sum, among prior features in range.

    Close to 1 when the candidate sits far from the local feature mass
    (one neighbor dominates the sum); small in dense surroundings. No
    neighbors at all counts as maximally isolated.
    """
    dists = []
    for feat in prior_map.features.values():
        d = math.hypot(feat.position[0] - position[0], feat.position[1] - position[1])
        if d <= radius:
            dists.append(d)
    if not dists:
        return 1.0
    total = sum(dists)
    if total <= 0.0:
        return 0.0
    return max(dists) / total


def select_and_merge(
    new_map: NewFeatureMap,
    prior_map: PriorMap,
    min_distance: float = 1.0,
    ratio_cutoff: float = 0.4,
    retrieve_radius: float = 40.0,
    duplicate_radius: float = 0.5,
) -> list[int]:
    """Promote mature isolated candidates into the prior map.

    A candidate qualifies once it was observed over more than
    `min_distance` of vehicle travel in a single drive. Qualified
    candidates in feature-dense surroundings (concentration ratio below
    the cutoff) are discarded as likely clutter; the rest are added to
    the map with a visibility record seeded from their observing poses.
    A qualified candidate landing within `duplicate_radius` of an
    existing feature is dropped as a duplicate. Returns added ids.
    """
    added = []
    for cid in list(new_map.candidates):
        cand = new_map.candidates[cid]
        if cand.distance_travelled <= min_distance:
            continue
        ratio = concentration_ratio(cand.position, prior_map, retrieve_radius)
        del new_map.candidates[cid]
        if ratio < ratio_cutoff:
            new_map.discard_log.append((cand.position, ratio, "ratio"))
            continue
        dup = any(
            math.hypot(f.position[0] - cand.position[0], f.position[1] - cand.position[1])
            <= duplicate_radius
            for f in prior_map.features.values()
        )
        if dup:
            new_map.discard_log.append((cand.position, ratio, "duplicate"))
            continue
        labels = Counter(o.label for o in cand.observations if o.label)
        feat = Feature(
            id=prior_map.next_id(),
            position=cand.position,
            kind=cand.kind,
            height=float(np.mean([o.height for o in cand.observations])),
            geom_param=float(np.mean([o.geom_param for o in cand.observations])),
            label_histogram=dict(labels),
            visibility=VisibilityRecord.empty(prior_map.n_bins),
        )
        seed_visibility(feat, [o.pose for o in cand.observations])
        prior_map.add(feat)
        added.append(feat.id)
    if added:
        prior_map.version += 1
    return added


def expire_stale(new_map: NewFeatureMap, max_age: int = 6) -> list[int]:
    """Age candidates one cycle; drop barely-observed ones past `max_age`."""
    expired = []
    for cid in list(new_map.candidates):
        cand = new_map.candidates[cid]
        cand.age += 1
        if len(cand.observations) < 2 and cand.age >= max_age:
            del new_map.candidates[cid]
            expired.append(cid)
    return expired
