"""On-disk formats: map layers as JSON, drive logs as JSONL, reports as CSV.

Maps are versioned JSON documents. Visibility arrays are stored as
plain JSON numbers (Python emits shortest round-trip representations,
so float64 values survive exactly); bulky grids are base64-encoded
float64 buffers with explicit shapes.
"""

from __future__ import annotations

import base64
import csv
import json
from pathlib import Path

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
)
from .localization import DrivableAreas
from .new_features import CandidateFeature, CandidateObservation, NewFeatureMap
from .sensor_model import SensorModelGrid
from .simulator import Occluder, WorldFeature, WorldTimeline

MAP_FORMAT_VERSION = 1

REPORT_COLUMNS = [
    "week",
    "height_pole",
    "height_corner",
    "resets",
    "added",
    "removed",
    "total_features",
    "strong_corrections",
    "rmse",
]


class MapFormatError(ValueError):
    """A map or layer file is malformed or from an unknown format."""


def _encode_array(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr, dtype=np.float64)
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(blob: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(blob["data"])
        arr = np.frombuffer(raw, dtype=np.float64).reshape(blob["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MapFormatError(f"bad array block: {exc}") from exc
    return arr.copy()


def _load_json(path, kind: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MapFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise MapFormatError(f"{path}: expected a JSON object")
    version = data.get("format_version")
    if version != MAP_FORMAT_VERSION:
        raise MapFormatError(
            f"{path}: unsupported {kind} format_version {version!r}, "
            f"expected {MAP_FORMAT_VERSION}"
        )
    return data


def _dump_json(data: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def save_map(prior_map: PriorMap, path: str | Path) -> None:
    data = {
        "format_version": MAP_FORMAT_VERSION,
        "kind": "prior_map",
        "version": prior_map.version,
        "angular_resolution_deg": prior_map.angular_resolution_deg,
        "features": [
            {
                "id": f.id,
                "position": [f.position[0], f.position[1]],
                "feature_kind": f.kind.value,
                "height": f.height,
                "geom_param": f.geom_param,
                "labels": f.label_histogram,
                "ranges": list(f.visibility.ranges),
                "logodds": list(f.visibility.logodds),
                "volume_ref": f.visibility.volume_ref,
            }
            for f in sorted(prior_map.features.values(), key=lambda f: f.id)
        ],
    }
    _dump_json(data, path)


def load_map(path: str | Path) -> PriorMap:
    data = _load_json(path, "map")
    if data.get("kind") != "prior_map":
        raise MapFormatError(f"{path}: not a prior map file")
    prior = PriorMap(
        angular_resolution_deg=float(data.get("angular_resolution_deg", 1.0)),
        version=int(data.get("version", 1)),
    )
    for row in data.get("features", []):
        try:
            feat = Feature(
                id=int(row["id"]),
                position=(float(row["position"][0]), float(row["position"][1])),
                kind=FeatureKind(row["feature_kind"]),
                height=float(row["height"]),
                geom_param=float(row["geom_param"]),
                label_histogram={str(k): int(v) for k, v in row.get("labels", {}).items()},
                visibility=VisibilityRecord(
                    ranges=[float(v) for v in row["ranges"]],
                    logodds=[float(v) for v in row["logodds"]],
                    volume_ref=float(row.get("volume_ref", 0.0)),
                ),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise MapFormatError(f"{path}: bad feature entry ({exc})") from exc
        prior.add(feat)
    return prior


def save_new_features(new_map: NewFeatureMap, path: str | Path) -> None:
    data = {
        "format_version": MAP_FORMAT_VERSION,
        "kind": "new_feature_layer",
        "next_id": new_map.next_id,
        "ingest_gate": new_map.ingest_gate,
        "candidates": {
            str(cid): {
                "feature_kind": c.kind.value,
                "position": [c.position[0], c.position[1]],
                "age": c.age,
                "distance_by_drive": {str(k): v for k, v in c.distance_by_drive.items()},
                "last_pose_by_drive": {
                    str(k): [p.x, p.y, p.heading] for k, p in c.last_pose_by_drive.items()
                },
                "observations": [
                    {
                        "pose": [o.pose.x, o.pose.y, o.pose.heading],
                        "local": [o.local[0], o.local[1]],
                        "height": o.height,
                        "geom_param": o.geom_param,
                        "label": o.label,
                    }
                    for o in c.observations
                ],
            }
            for cid, c in sorted(new_map.candidates.items())
        },
    }
    _dump_json(data, path)


def load_new_features(path: str | Path) -> NewFeatureMap:
    data = _load_json(path, "new-feature layer")
    if data.get("kind") != "new_feature_layer":
        raise MapFormatError(f"{path}: not a new-feature layer file")
    new_map = NewFeatureMap(
        next_id=int(data.get("next_id", 0)),
        ingest_gate=float(data.get("ingest_gate", 1.0)),
    )
    for cid, row in data.get("candidates", {}).items():
        cand = CandidateFeature(
            kind=FeatureKind(row["feature_kind"]),
            position=(float(row["position"][0]), float(row["position"][1])),
            age=int(row.get("age", 0)),
            distance_by_drive={int(k): float(v) for k, v in row["distance_by_drive"].items()},
            last_pose_by_drive={
                int(k): Pose2(*v) for k, v in row["last_pose_by_drive"].items()
            },
            observations=[
                CandidateObservation(
                    pose=Pose2(*o["pose"]),
                    local=(float(o["local"][0]), float(o["local"][1])),
                    height=float(o["height"]),
                    geom_param=float(o["geom_param"]),
                    label=o.get("label", ""),
                )
                for o in row.get("observations", [])
            ],
        )
        new_map.candidates[int(cid)] = cand
    return new_map


def save_sensor_grid(grid: SensorModelGrid, path: str | Path) -> None:
    data = {
        "format_version": MAP_FORMAT_VERSION,
        "kind": "sensor_grid",
        "extent": grid.extent,
        "cell_size": grid.cell_size,
        "l_hit": grid.l_hit,
        "l_miss": grid.l_miss,
        "clamp": grid.clamp,
        "layers": {k.value: _encode_array(v) for k, v in grid.logodds.items()},
    }
    _dump_json(data, path)


def load_sensor_grid(path: str | Path) -> SensorModelGrid:
    data = _load_json(path, "sensor grid")
    if data.get("kind") != "sensor_grid":
        raise MapFormatError(f"{path}: not a sensor grid file")
    grid = SensorModelGrid(
        extent=float(data["extent"]),
        cell_size=float(data["cell_size"]),
        l_hit=float(data["l_hit"]),
        l_miss=float(data["l_miss"]),
        clamp=float(data["clamp"]),
    )
    for key, blob in data.get("layers", {}).items():
        arr = _decode_array(blob)
        if arr.shape != grid.logodds[FeatureKind(key)].shape:
            raise MapFormatError(f"{path}: grid layer {key} has shape {arr.shape}")
        grid.logodds[FeatureKind(key)] = arr
    return grid


def _step_to_dict(step: DriveStep) -> dict:
    return {
        "t": step.t,
        "delta": list(step.odometry_delta),
        "speed": step.speed,
        "fix": list(step.global_fix) if step.global_fix is not None else None,
        "true_pose": (
            [step.true_pose.x, step.true_pose.y, step.true_pose.heading]
            if step.true_pose is not None
            else None
        ),
        "observations": [
            {
                "p": [o.position_local[0], o.position_local[1]],
                "feature_kind": o.kind.value,
                "height": o.height,
                "geom_param": o.geom_param,
                "label": o.label,
            }
            for o in step.observations
        ],
        "points3d": _encode_array(step.points3d),
    }


def _step_from_dict(row: dict) -> DriveStep:
    return DriveStep(
        t=float(row["t"]),
        odometry_delta=tuple(row["delta"]),
        observations=[
            Observation(
                position_local=(float(o["p"][0]), float(o["p"][1])),
                kind=FeatureKind(o["feature_kind"]),
                height=float(o["height"]),
                geom_param=float(o["geom_param"]),
                label=o.get("label", ""),
            )
            for o in row.get("observations", [])
        ],
        points3d=_decode_array(row["points3d"]).reshape(-1, 3),
        speed=float(row["speed"]),
        global_fix=tuple(row["fix"]) if row.get("fix") is not None else None,
        true_pose=Pose2(*row["true_pose"]) if row.get("true_pose") is not None else None,
    )


def save_drive_log(log: DriveLog, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for step in log.steps:
            fh.write(json.dumps(_step_to_dict(step), sort_keys=True))
            fh.write("\n")


def load_drive_log(path: str | Path) -> DriveLog:
    log = DriveLog()
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                log.append(_step_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MapFormatError(f"{path}:{n}: bad drive step ({exc})") from exc
    return log


def save_world(world: WorldTimeline, path: str | Path) -> None:
    data = {
        "format_version": MAP_FORMAT_VERSION,
        "kind": "world",
        "route": [list(p) for p in world.route],
        "features": [
            {
                "id": f.id,
                "position": list(f.position),
                "feature_kind": f.kind.value,
                "height": f.height,
                "geom_param": f.geom_param,
                "label": f.label,
                "born_week": f.born_week,
                "died_week": f.died_week,
            }
            for f in world.features
        ],
        "occluders": [
            {
                "center": list(o.center),
                "width": o.width,
                "depth": o.depth,
                "height": o.height,
                "velocity": list(o.velocity),
            }
            for o in world.occluders
        ],
        "drivable": {
            "polygons": [[list(p) for p in ring] for ring in world.drivable.polygons],
            "holes": [[list(p) for p in ring] for ring in world.drivable.holes],
        },
    }
    _dump_json(data, path)


def load_world(path: str | Path) -> WorldTimeline:
    data = _load_json(path, "world")
    if data.get("kind") != "world":
        raise MapFormatError(f"{path}: not a world file")
    try:
        features = [
            WorldFeature(
                id=int(row["id"]),
                position=tuple(row["position"]),
                kind=FeatureKind(row["feature_kind"]),
                height=float(row["height"]),
                geom_param=float(row["geom_param"]),
                label=row.get("label", ""),
                born_week=int(row.get("born_week", 0)),
                died_week=row["died_week"] if row.get("died_week") is None else int(row["died_week"]),
            )
            for row in data.get("features", [])
        ]
        occluders = [
            Occluder(
                center=tuple(row["center"]),
                width=float(row["width"]),
                depth=float(row["depth"]),
                height=float(row["height"]),
                velocity=tuple(row.get("velocity", (0.0, 0.0))),
            )
            for row in data.get("occluders", [])
        ]
        drivable = DrivableAreas(
            polygons=[[tuple(p) for p in ring] for ring in data["drivable"]["polygons"]],
            holes=[[tuple(p) for p in ring] for ring in data["drivable"]["holes"]],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MapFormatError(f"{path}: bad world entry ({exc})") from exc
    return WorldTimeline(
        features=features,
        route=[tuple(p) for p in data["route"]],
        occluders=occluders,
        drivable=drivable,
    )


def save_report(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in REPORT_COLUMNS})


def load_report(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_COLUMNS:
            raise MapFormatError(f"{path}: unexpected report columns {reader.fieldnames}")
        out = []
        for row in reader:
            parsed = dict(row)
            for key in ("week", "resets", "added", "removed", "total_features",
                        "strong_corrections"):
                parsed[key] = int(row[key])
            for key in ("height_pole", "height_corner", "rmse"):
                parsed[key] = float(row[key])
            out.append(parsed)
        return out
