"""Device adapter: exposes the PLC tag table through the tag server.

Plain actuator writes become queued PLC commands; writes to the mission
request point are arbitrated synchronously so the WRITE's ACK can carry the
verdict (``mission=I:<id>`` or ``rejected=S:<reason>``); safety-mat writes go
straight to the interlock. Sensor points are read-only on the wire.
"""

from __future__ import annotations

from .. import tagnames
from ..protocol.server import SCOPE_MISSION, SCOPE_WRITE
from .plc import MissionKind, Origin, Plc
from .tags import TagType, check_value


class DeviceAdapter:
    def __init__(self, plc: Plc):
        self.plc = plc
        self.wire_writes_applied = 0  # audited by the security-gate tests

    def match(self, pattern: str) -> list[str]:
        return self.plc.table.match(pattern)

    def read(self, names: list[str]):
        out = []
        for name in names:
            tag = self.plc.table.get(name)
            out.append((name, tag.vtype, tag.value))
        return out

    def write_scope(self, name: str) -> str:
        return SCOPE_MISSION if name == tagnames.MISSION_REQ else SCOPE_WRITE

    def write(self, assignments, session):
        table = self.plc.table
        mission_req = None
        for name, vtype, value in assignments:
            if name not in table:
                return 0, [], "UnknownTag"
            if name == tagnames.MISSION_REQ:
                if vtype is not TagType.STRING:
                    return 0, [], "BadPayload"
                mission_req = str(value)
                continue
            if not table.writable(name):
                return 0, [], "ReadOnly"
            declared = table.get(name).vtype
            try:
                check_value(declared, value)
            except (TypeError, ValueError):
                return 0, [], "BadPayload"
        extra: list[str] = []
        applied = 0
        for name, vtype, value in assignments:
            if name == tagnames.MISSION_REQ:
                outcome_lines = self._submit(mission_req, session)
                if outcome_lines is None:
                    return 0, [], "BadPayload"
                extra.extend(outcome_lines)
                applied += 1
                continue
            err = self.plc.enqueue_write(
                name, value, remote=session.remote, label=f"session:{session.session_id}"
            )
            if err:
                return 0, [], err
            applied += 1
            self.wire_writes_applied += 1
        return applied, extra, None

    def _submit(self, request: str, session) -> list[str] | None:
        """Request format: '<kind>:<station>:<origin>', e.g. 'pass:3:twin'."""
        parts = request.split(":")
        if len(parts) != 3:
            return None
        try:
            kind = MissionKind.decode(":".join(parts[:2]))
            origin = Origin(parts[2])
        except (ValueError, KeyError):
            return None
        self.plc.table.set(tagnames.MISSION_REQ, request, self.plc.tick_index)
        outcome = self.plc.submit_mission(kind, origin)
        if outcome.accepted:
            return [f"mission=I:{outcome.mission_id}"]
        return [f"rejected=S:{outcome.reason.value}"]
