"""Long-term maintenance of pole/corner feature maps for localization."""

from .core import (
    DriveLog,
    DriveStep,
    Feature,
    FeatureKind,
    Observation,
    Pose2,
    PriorMap,
    VisibilityRecord,
    to_global,
    to_polar,
    to_vehicle,
    wrap_angle,
)
from .matcher import IcpConfig, MatchResult, icp_align, retrieve_local
from .new_features import NewFeatureMap
from .sensor_model import SensorModelGrid, probability
from .visibility import purge_transient, update_visibility, visibility_volume

__all__ = [
    "DriveLog",
    "DriveStep",
    "Feature",
    "FeatureKind",
    "IcpConfig",
    "MatchResult",
    "NewFeatureMap",
    "Observation",
    "Pose2",
    "PriorMap",
    "SensorModelGrid",
    "VisibilityRecord",
    "icp_align",
    "probability",
    "purge_transient",
    "retrieve_local",
    "to_global",
    "to_polar",
    "to_vehicle",
    "update_visibility",
    "visibility_volume",
    "wrap_angle",
]

__version__ = "0.1.0"
