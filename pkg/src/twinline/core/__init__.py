from .model import (
    DuplicateThingId,
    EventDecl,
    PropertyDecl,
    ServiceDecl,
    Thing,
    ThingRegistry,
    ThingShape,
    ThingTemplate,
    UnboundTag,
    UnknownTemplate,
)
from .missions import MissionRecord, TwinMissionState
from .estimator import PalletEstimate, PalletEstimator
from .telemetry import Histogram, SyncMetrics, apply_telemetry
from .kpi import KpiReport, KpiStore
from .service import DtCore

__all__ = [
    "ThingShape",
    "ThingTemplate",
    "Thing",
    "ThingRegistry",
    "PropertyDecl",
    "EventDecl",
    "ServiceDecl",
    "UnknownTemplate",
    "DuplicateThingId",
    "UnboundTag",
    "MissionRecord",
    "TwinMissionState",
    "PalletEstimate",
    "PalletEstimator",
    "SyncMetrics",
    "Histogram",
    "apply_telemetry",
    "KpiReport",
    "KpiStore",
    "DtCore",
]
