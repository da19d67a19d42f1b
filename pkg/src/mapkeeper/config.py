"""Scenario configuration: one JSON document drives a whole campaign.

A scenario bundles the world generator parameters, the detector and
drive models, the filter tuning, and the maintenance thresholds, plus
the week-by-week detector height schedule. Everything round-trips
through plain dicts so scenarios can live in version-controlled JSON.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import FeatureKind
from .localization import FilterConfig
from .simulator import ChangeEvent, DetectorConfig, DriveConfig, WorldConfig

# Detector minimum heights per week: (week, pole, corner). Later weeks
# admit shorter features, which surface as new-feature candidates.
DEFAULT_RELAXATION: list[tuple[int, float, float]] = [
    (1, 1.6, 1.8),
    (8, 1.6, 1.5),
    (11, 1.5, 1.5),
    (15, 1.4, 1.5),
    (18, 1.4, 1.4),
]


@dataclass
class GridConfig:
    extent: float = 60.0
    cell_size: float = 0.5
    n_cells: int = 120  # obstacle grid resolution over the same extent
    th_gm: float = 0.3  # z spread above which a cell blocks sightlines
    l_hit: float = 0.7
    l_miss: float = -0.4
    clamp: float = 2.0


@dataclass
class MaintenanceConfig:
    th_vis: float = 0.12  # relative visibility-volume drop that purges
    cluster_link: float = 0.5
    cluster_sigma: float = 0.15
    ratio_cutoff: float = 0.4
    min_distance: float = 1.0  # travel needed before a candidate matures
    retrieve_radius: float = 40.0
    duplicate_radius: float = 0.5
    candidate_max_age: int = 6
    icp_gate: float = 1.0


@dataclass
class ScenarioConfig:
    seed: int = 0
    weeks: int = 12  # one drive per week
    cadence: int = 1  # maintenance every this many drives
    world: WorldConfig = field(default_factory=WorldConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    drive: DriveConfig = field(default_factory=DriveConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    maintenance: MaintenanceConfig = field(default_factory=MaintenanceConfig)
    relaxation: list[tuple[int, float, float]] = field(
        default_factory=lambda: list(DEFAULT_RELAXATION)
    )

    def thresholds_for_week(self, week: int) -> dict[FeatureKind, float]:
        """Height gate in force at `week`: the last breakpoint reached."""
        pole, corner = self.relaxation[0][1], self.relaxation[0][2]
        for w, p, c in self.relaxation:
            if week >= w:
                pole, corner = p, c
        return {FeatureKind.POLE: pole, FeatureKind.CORNER: corner}

    def detector_for_week(self, week: int) -> DetectorConfig:
        det = dataclasses.replace(self.detector)
        det.height_thresholds = self.thresholds_for_week(week)
        return det


def _plain(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {
            (k.value if isinstance(k, FeatureKind) else k): _plain(v)
            for k, v in value.items()
        }
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def scenario_to_dict(config: ScenarioConfig) -> dict:
    return _plain(config)


def _hydrate(cls, data: dict):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if f.name == "height_thresholds":
            value = {FeatureKind(k): float(v) for k, v in value.items()}
        elif f.name == "events":
            value = [_hydrate(ChangeEvent, e) for e in value]
        elif f.name in ("drift", "pole_height", "corner_height",
                        "occluder_height", "occluder_size", "center"):
            value = tuple(value) if value is not None else None
        elif f.name == "relaxation":
            value = [tuple(row) for row in value]
        kwargs[f.name] = value
    return cls(**kwargs)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    out = {}
    nested = {
        "world": WorldConfig,
        "detector": DetectorConfig,
        "drive": DriveConfig,
        "filter": FilterConfig,
        "grid": GridConfig,
        "maintenance": MaintenanceConfig,
    }
    for key, value in data.items():
        if key in nested:
            out[key] = _hydrate(nested[key], value)
        elif key == "relaxation":
            out[key] = [tuple(row) for row in value]
        else:
            out[key] = value
    return ScenarioConfig(**out)


def load_scenario(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path}: scenario must be a JSON object")
    return scenario_from_dict(data)


def save_scenario(config: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
