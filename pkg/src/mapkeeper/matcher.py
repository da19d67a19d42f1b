"""ICP-style data association between observations and map features.

The matcher pairs globally-projected observations with nearby map
features, estimates the rigid 2D transform that best aligns the paired
points, and iterates. Its three outputs feed the rest of the pipeline:
matched pairs, unmatched map features (candidates for visibility
penalties) and unmatched observations (candidates for the new feature
layer), plus the transform itself as a pose-offset measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Feature, Pose2, PriorMap


@dataclass
class IcpConfig:
    max_iter: int = 30
    match_gate: float = 1.0  # meters; pairs beyond this are rejected
    eps: float = 1e-4  # transform-delta convergence threshold


@dataclass
class MatchResult:
    """Outcome of one alignment: transform maps observations onto the map."""

    transform: tuple[float, float, float]  # (dx, dy, dtheta)
    matched: list[tuple[int, int]]  # (map id, observation index)
    unmatched_map: list[int]
    unmatched_obs: list[int]
    converged: bool
    mean_residual: float
    residual_history: list[float] = field(default_factory=list)


def retrieve_local(prior_map: PriorMap, pose: Pose2, radius: float = 40.0) -> list[Feature]:
    """Map features within `radius` meters of the pose estimate."""
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    out = []
    for feat in prior_map.features.values():
        if math.hypot(feat.position[0] - pose.x, feat.position[1] - pose.y) <= radius:
            out.append(feat)
    return out


def _greedy_pairs(obs, map_pts, obs_kinds, map_kinds, gate):
    """Distance-ordered greedy one-to-one pairing within the gate.

    Returns a list of (obs_index, map_index); kind-aware when kind
    arrays are given (poles never pair with corners).
    """
    d = np.linalg.norm(obs[:, None, :] - map_pts[None, :, :], axis=2)
    if obs_kinds is not None:
        same = np.asarray(obs_kinds)[:, None] == np.asarray(map_kinds)[None, :]
        d = np.where(same, d, np.inf)
    flat = np.argsort(d, axis=None, kind="stable")
    pairs = []
    used_obs = np.zeros(len(obs), dtype=bool)
    used_map = np.zeros(len(map_pts), dtype=bool)
    n_map = len(map_pts)
    for k in flat:
        i, j = divmod(int(k), n_map)
        if d[i, j] > gate:
            break
        if used_obs[i] or used_map[j]:
            continue
        used_obs[i] = True
        used_map[j] = True
        pairs.append((i, j))
    return pairs


def _fit_rigid(src, dst):
    """Closed-form least-squares 2D rigid transform src -> dst."""
    sc = src.mean(axis=0)
    dc = dst.mean(axis=0)
    s = src - sc
    d = dst - dc
    sxx = float(np.sum(s[:, 0] * d[:, 0] + s[:, 1] * d[:, 1]))
    sxy = float(np.sum(s[:, 0] * d[:, 1] - s[:, 1] * d[:, 0]))
    theta = math.atan2(sxy, sxx) if (sxx != 0.0 or sxy != 0.0) else 0.0
    c, si = math.cos(theta), math.sin(theta)
    tx = dc[0] - (c * sc[0] - si * sc[1])
    ty = dc[1] - (si * sc[0] + c * sc[1])
    return tx, ty, theta


def _apply(transform, pts):
    tx, ty, theta = transform
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return pts @ rot.T + np.array([tx, ty])


def icp_align(
    observations_global,
    map_points,
    obs_kinds=None,
    map_kinds=None,
    map_ids=None,
    config: IcpConfig | None = None,
) -> MatchResult:
    """Iteratively pair and align observation points with map points.

    Each iteration re-pairs (greedy nearest within the gate, one-to-one,
    kind-consistent), refits the rigid transform on the pairs, and stops
    when the transform stops moving, the iteration cap is hit, or the
    mean pair residual would increase (the previous transform is kept in
    that case, so the reported residual history is non-increasing).
    """
    if config is None:
        config = IcpConfig()
    obs = np.asarray(observations_global, dtype=float).reshape(-1, 2)
    mp = np.asarray(map_points, dtype=float).reshape(-1, 2)
    if len(obs) == 0 or len(mp) == 0:
        raise ValueError("icp_align requires non-empty observation and map sets")
    if map_ids is None:
        map_ids = list(range(len(mp)))
    if obs_kinds is not None:
        # np.asarray mangles str-subclass enums (dtype sized from the str
        # payload, cells filled from str() and truncated), so compare the
        # plain values instead
        obs_kinds = np.asarray([getattr(k, "value", k) for k in obs_kinds])
        map_kinds = np.asarray([getattr(k, "value", k) for k in map_kinds])

    transform = (0.0, 0.0, 0.0)
    pairs: list[tuple[int, int]] = []
    history: list[float] = []
    converged = False
    best_residual = math.inf

    for _ in range(config.max_iter):
        moved = _apply(transform, obs)
        new_pairs = _greedy_pairs(moved, mp, obs_kinds, map_kinds, config.match_gate)
        if not new_pairs:
            break
        src = obs[[i for i, _ in new_pairs]]
        dst = mp[[j for _, j in new_pairs]]
        new_transform = _fit_rigid(src, dst)
        residual = float(np.mean(np.linalg.norm(_apply(new_transform, src) - dst, axis=1)))
        if residual > best_residual + 1e-12:
            converged = True
            break
        pairs = new_pairs
        history.append(residual)
        best_residual = residual
        delta = math.hypot(new_transform[0] - transform[0], new_transform[1] - transform[1]) + abs(
            new_transform[2] - transform[2]
        )
        transform = new_transform
        if delta < config.eps:
            converged = True
            break

    matched_obs = {i for i, _ in pairs}
    matched_map = {j for _, j in pairs}
    return MatchResult(
        transform=transform,
        matched=[(map_ids[j], i) for i, j in pairs],
        unmatched_map=[map_ids[j] for j in range(len(mp)) if j not in matched_map],
        unmatched_obs=[i for i in range(len(obs)) if i not in matched_obs],
        converged=converged and bool(pairs),
        mean_residual=history[-1] if history else math.inf,
        residual_history=history,
    )
