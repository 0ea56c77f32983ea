from .tags import Quality, TagTable, TagType, TagValue
from .plc import (
    Command,
    MissionKind,
    MissionOutcome,
    Origin,
    Plc,
    PlcMissionState,
    RejectReason,
    ScanLog,
    UnknownMission,
    UnknownStation,
)

__all__ = [
    "TagTable",
    "TagValue",
    "TagType",
    "Quality",
    "Plc",
    "Origin",
    "MissionKind",
    "MissionOutcome",
    "PlcMissionState",
    "RejectReason",
    "ScanLog",
    "Command",
    "UnknownMission",
    "UnknownStation",
]
