"""Twin-side mission records: the slave half of the handshake.

The twin never replicates motion for a mission before the controller has
validated it; the record keeps per-transition timestamps so traces can audit
exactly that ordering.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..plc.plc import MissionKind, Origin


class TwinMissionState(enum.Enum):
    REQUESTED = "Requested"
    VALIDATED = "Validated"
    EXECUTING = "Executing"
    COMPLETED = "Completed"
    REJECTED = "Rejected"
    TIMED_OUT = "TimedOut"


TERMINAL = (
    TwinMissionState.COMPLETED,
    TwinMissionState.REJECTED,
    TwinMissionState.TIMED_OUT,
)

_ALLOWED = {
    TwinMissionState.REQUESTED: {
        TwinMissionState.VALIDATED,
        TwinMissionState.REJECTED,
        TwinMissionState.TIMED_OUT,
    },
    TwinMissionState.VALIDATED: {
        TwinMissionState.EXECUTING,
        TwinMissionState.COMPLETED,
        TwinMissionState.REJECTED,
        TwinMissionState.TIMED_OUT,
    },
    TwinMissionState.EXECUTING: {
        TwinMissionState.COMPLETED,
        TwinMissionState.REJECTED,
        TwinMissionState.TIMED_OUT,
    },
}


@dataclass
class MissionRecord:
    mission_id: int
    kind: MissionKind
    origin: Origin
    state: TwinMissionState = TwinMissionState.REQUESTED
    plc_mission_id: int | None = None
    reject_reason: str = ""
    timestamps: dict[str, int] = field(default_factory=dict)
    replicated_at: int | None = None

    @property
    def station(self) -> int:
        return self.kind.station

    def to_dict(self) -> dict:
        return {
            "mission_id": self.mission_id,
            "plc_mission_id": self.plc_mission_id,
            "kind": self.kind.mission_type.value,
            "station": self.kind.station,
            "origin": self.origin.value,
            "state": self.state.value,
            "reject_reason": self.reject_reason,
            "timestamps": dict(self.timestamps),
            "replicated_at": self.replicated_at,
        }


class MissionLog:
    def __init__(self):
        self.records: dict[int, MissionRecord] = {}
        self.by_plc_id: dict[int, int] = {}
        self._next = 1

    def create(self, kind: MissionKind, origin: Origin, now_ms: int) -> MissionRecord:
        record = MissionRecord(self._next, kind, origin)
        record.timestamps[TwinMissionState.REQUESTED.value] = now_ms
        self.records[record.mission_id] = record
        self._next += 1
        return record

    def shadow(
        self,
        plc_id: int,
        kind: MissionKind,
        origin: Origin,
        state: TwinMissionState,
        now_ms: int,
        reason: str = "",
    ) -> MissionRecord:
        """Track a mission someone else originated, from whatever state the
        batched telemetry first shows."""
        record = MissionRecord(self._next, kind, origin, state=state)
        record.plc_mission_id = plc_id
        record.timestamps[state.value] = now_ms
        record.reject_reason = reason
        self.records[record.mission_id] = record
        self.by_plc_id[plc_id] = record.mission_id
        self._next += 1
        return record

    def get(self, mission_id: int) -> MissionRecord | None:
        return self.records.get(mission_id)

    def by_plc(self, plc_mission_id: int) -> MissionRecord | None:
        local = self.by_plc_id.get(plc_mission_id)
        return self.records.get(local) if local is not None else None

    def open_at_station(self, station: int) -> MissionRecord | None:
        for record in self.records.values():
            if record.station == station and record.state in (
                TwinMissionState.VALIDATED,
                TwinMissionState.EXECUTING,
            ):
                return record
        return None

    def transition(
        self, record: MissionRecord, state: TwinMissionState, now_ms: int, reason: str = ""
    ) -> bool:
        """Forward-only; returns False (no-op) for late or illegal updates."""
        if record.state in TERMINAL:
            return False
        if state not in _ALLOWED.get(record.state, set()):
            return False
        record.state = state
        record.timestamps[state.value] = now_ms
        if reason:
            record.reject_reason = reason
        return True
