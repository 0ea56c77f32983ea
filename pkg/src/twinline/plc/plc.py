"""Soft PLC: deterministic scan cycles over the tag table, mission
arbitration, and the operator-presence interlock.

The PLC is the authority over all physical action. Every actuator value the
line sees is a scan-cycle output: network writes and missions only enqueue
requests that the next scan arbitrates. ``scan_cycle`` itself is a pure
function of (sensor inputs, logic state, pending commands), which is what the
replay tests rely on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .. import tagnames
from ..config import FactoryConfig
from ..factory.state import FlowLedger
from .tags import Quality, TagTable, TagType


class Origin(enum.Enum):
    HMI = "hmi"
    PLATFORM = "platform"
    TWIN = "twin"

    @property
    def remote(self) -> bool:
        # only the local HMI operator is exempt from the presence interlock
        return self is not Origin.HMI


class MissionType(enum.Enum):
    PASS_DOCKING = "pass"
    ELEVATOR_UP = "elev_up"
    ELEVATOR_DOWN = "elev_down"


@dataclass(frozen=True)
class MissionKind:
    mission_type: MissionType
    station: int

    @classmethod
    def pass_docking(cls, station: int) -> "MissionKind":
        return cls(MissionType.PASS_DOCKING, station)

    @classmethod
    def elevator(cls, station: int, up: bool) -> "MissionKind":
        return cls(MissionType.ELEVATOR_UP if up else MissionType.ELEVATOR_DOWN, station)

    def encode(self) -> str:
        return f"{self.mission_type.value}:{self.station}"

    @classmethod
    def decode(cls, text: str) -> "MissionKind":
        type_part, station_part = text.split(":", 1)
        return cls(MissionType(type_part), int(station_part))


class PlcMissionState(enum.Enum):
    VALIDATED = "Validated"
    EXECUTING = "Executing"
    COMPLETED = "Completed"
    FAILED = "Failed"


TERMINAL = (PlcMissionState.COMPLETED, PlcMissionState.FAILED)


class RejectReason(enum.Enum):
    STATION_BUSY = "StationBusy"
    NO_PALLET = "NoPallet"
    INTERLOCK_ENGAGED = "InterlockEngaged"
    UNKNOWN_STATION = "UnknownStation"


@dataclass
class MissionOutcome:
    accepted: bool
    mission_id: int | None = None
    reason: RejectReason | None = None


class UnknownStation(KeyError):
    pass


class UnknownMission(KeyError):
    pass


@dataclass
class PlcMission:
    mission_id: int
    kind: MissionKind
    origin: Origin
    state: PlcMissionState = PlcMissionState.VALIDATED
    fail_reason: str = ""


@dataclass
class Command:
    """A deferred actuator write consumed at the next scan boundary."""

    point: str
    value: bool
    remote: bool
    label: str = ""


@dataclass(frozen=True)
class Override:
    """An arbitrated actuator override and who put it there."""

    value: bool
    source: str  # "manual:remote" | "manual:local" | "mission:<id>:<origin>"

    @property
    def remote(self) -> bool:
        return self.source == "manual:remote" or (
            self.source.startswith("mission:")
            and not self.source.endswith(":" + Origin.HMI.value)
        )


@dataclass
class LogicState:
    station_count: int
    missions: dict[int, PlcMission] = field(default_factory=dict)
    station_mission: dict[int, int] = field(default_factory=dict)
    stop_override: dict[int, Override] = field(default_factory=dict)
    elev_override: dict[int, Override] = field(default_factory=dict)
    queue_override: Override | None = None
    next_mission_id: int = 1

    def copy(self) -> "LogicState":
        return LogicState(
            station_count=self.station_count,
            missions={k: replace(m) for k, m in self.missions.items()},
            station_mission=dict(self.station_mission),
            stop_override=dict(self.stop_override),
            elev_override=dict(self.elev_override),
            queue_override=self.queue_override,
            next_mission_id=self.next_mission_id,
        )


@dataclass
class ActuatorChange:
    point: str
    value: bool
    source: str  # "mission:<id>:<origin>" | "manual:remote" | "manual:local" | "logic"


@dataclass
class ScanLog:
    tick: int
    inputs: dict[str, bool | str]
    commands: list[Command]
    outputs: dict[str, bool]
    output_quality: dict[str, Quality]
    changes: list[ActuatorChange]
    blocked_commands: list[tuple[Command, str]]
    transitions: list[tuple[int, int, PlcMissionState, str]]  # id, station, new, reason
    operator_present: dict[int, bool]


def scan_cycle(
    inputs: dict[str, bool | str],
    logic: LogicState,
    commands: list[Command],
    previous_outputs: dict[str, bool],
    tick: int,
    input_quality: dict[str, Quality] | None = None,
) -> tuple[dict[str, bool], LogicState, ScanLog]:
    """One deterministic scan: arbitrate commands and missions, produce the
    actuator image. Pure: arguments are not mutated."""
    logic = logic.copy()
    stations = range(1, logic.station_count + 1)
    present = {k: bool(inputs.get(tagnames.operator_mat(k), False)) for k in stations}
    transitions: list[tuple[int, int, PlcMissionState, str]] = []
    blocked: list[tuple[Command, str]] = []
    changes: list[ActuatorChange] = []

    def fail(mission: PlcMission, reason: str):
        mission.state = PlcMissionState.FAILED
        mission.fail_reason = reason
        logic.station_mission.pop(mission.kind.station, None)
        transitions.append(
            (mission.mission_id, mission.kind.station, PlcMissionState.FAILED, reason)
        )

    # presence interlock: stop remote-origin work at occupied stations and
    # drop remote overrides there (safe default = stop engaged)
    for k in stations:
        if not present[k]:
            continue
        mid = logic.station_mission.get(k)
        if mid is not None and logic.missions[mid].origin.remote:
            fail(logic.missions[mid], RejectReason.INTERLOCK_ENGAGED.value)
        logic.stop_override.pop(k, None)
        if k in logic.elev_override and logic.elev_override[k].remote:
            logic.elev_override.pop(k)

    # deferred network writes
    for cmd in commands:
        station = tagnames.station_of(cmd.point)
        if station is not None and cmd.remote and present.get(station, False):
            blocked.append((cmd, RejectReason.INTERLOCK_ENGAGED.value))
            continue
        if (
            station is not None
            and station in logic.station_mission
            and cmd.point == tagnames.stop(station)
        ):
            blocked.append((cmd, "MissionOwnsStation"))
            continue
        override = Override(cmd.value, f"manual:{'remote' if cmd.remote else 'local'}")
        if cmd.point == tagnames.QUEUE_STOP:
            logic.queue_override = override
        elif station is not None and cmd.point == tagnames.stop(station):
            logic.stop_override[station] = override
        elif station is not None and cmd.point == tagnames.elev_cmd(station):
            logic.elev_override[station] = override
        else:
            blocked.append((cmd, "UnknownActuator"))
            continue

    # mission progression
    executing_pass: dict[int, int] = {}
    for k in sorted(logic.station_mission):
        mid = logic.station_mission[k]
        m = logic.missions[mid]
        mtype = m.kind.mission_type
        mission_source = f"mission:{mid}:{m.origin.value}"
        if m.state is PlcMissionState.VALIDATED:
            m.state = PlcMissionState.EXECUTING
            transitions.append((mid, k, PlcMissionState.EXECUTING, ""))
            if mtype in (MissionType.ELEVATOR_UP, MissionType.ELEVATOR_DOWN):
                logic.elev_override[k] = Override(
                    mtype is MissionType.ELEVATOR_UP, mission_source
                )
        if m.state is PlcMissionState.EXECUTING:
            done = False
            if mtype is MissionType.PASS_DOCKING:
                if not inputs.get(tagnames.pallet_a(k), False):
                    done = True  # trailing edge cleared the stop sensor
                else:
                    executing_pass[k] = mid
            elif mtype is MissionType.ELEVATOR_UP:
                done = bool(inputs.get(tagnames.elev_b(k), False))
            else:
                done = bool(inputs.get(tagnames.elev_a(k), False))
            if done:
                m.state = PlcMissionState.COMPLETED
                transitions.append((mid, k, PlcMissionState.COMPLETED, ""))
                logic.station_mission.pop(k, None)

    # actuator image (default-hold: stops engaged unless a mission or an
    # arbitrated override says otherwise)
    outputs: dict[str, bool] = {}
    sources: dict[str, str] = {}
    for k in stations:
        stop_point = tagnames.stop(k)
        if k in executing_pass:
            m = logic.missions[executing_pass[k]]
            outputs[stop_point] = False
            sources[stop_point] = f"mission:{m.mission_id}:{m.origin.value}"
        elif k in logic.stop_override:
            outputs[stop_point] = logic.stop_override[k].value
            sources[stop_point] = logic.stop_override[k].source
        else:
            outputs[stop_point] = True
        elev_point = tagnames.elev_cmd(k)
        if k in logic.elev_override:
            outputs[elev_point] = logic.elev_override[k].value
            sources[elev_point] = logic.elev_override[k].source
        else:
            outputs[elev_point] = False

    if logic.queue_override is not None:
        outputs[tagnames.QUEUE_STOP] = logic.queue_override.value
        sources[tagnames.QUEUE_STOP] = logic.queue_override.source
    else:
        # admit one pallet toward station 1 when the dock area is clear
        release = (
            bool(inputs.get(tagnames.QUEUE_SENSOR, False))
            and not inputs.get(tagnames.pallet_a(1), False)
            and not inputs.get(tagnames.pallet_b(1), False)
        )
        outputs[tagnames.QUEUE_STOP] = not release

    for point in sorted(outputs):
        if previous_outputs.get(point) != outputs[point]:
            changes.append(
                ActuatorChange(point, outputs[point], sources.get(point, "logic"))
            )

    # Stale inputs poison the outputs that depend on them
    quality: dict[str, Quality] = {}
    iq = input_quality or {}

    def stale(*names: str) -> Quality:
        for n in names:
            if iq.get(n) is Quality.STALE:
                return Quality.STALE
        return Quality.GOOD

    for k in stations:
        q = stale(
            tagnames.pallet_a(k), tagnames.pallet_b(k), tagnames.operator_mat(k)
        )
        quality[tagnames.stop(k)] = q
        quality[tagnames.elev_cmd(k)] = stale(tagnames.elev_a(k), tagnames.elev_b(k))
    quality[tagnames.QUEUE_STOP] = stale(
        tagnames.QUEUE_SENSOR, tagnames.pallet_a(1), tagnames.pallet_b(1)
    )

    log = ScanLog(
        tick=tick,
        inputs=dict(inputs),
        commands=list(commands),
        outputs=dict(outputs),
        output_quality=quality,
        changes=changes,
        blocked_commands=blocked,
        transitions=transitions,
        operator_present=present,
    )
    return outputs, logic, log


class Plc:
    """Holds the tag table and runs the scan; submissions and interlock
    changes may arrive between scans and are serialized with them."""

    def __init__(self, config: FactoryConfig):
        self.config = config
        self.table = TagTable()
        self.logic = LogicState(station_count=config.station_count)
        self.pending: list[Command] = []
        self.last_inputs: dict[str, bool | str] = {}
        # the image starts in the safe default the line also boots in, so the
        # first scan does not log spurious changes
        self.last_outputs: dict[str, bool] = {}
        for k in range(1, config.station_count + 1):
            self.last_outputs[tagnames.stop(k)] = True
            self.last_outputs[tagnames.elev_cmd(k)] = False
        self.last_outputs[tagnames.QUEUE_STOP] = True
        self.scan_logs: list[ScanLog] = []
        self.keep_scan_logs = True
        self.transition_log: list[tuple[int, int, int, PlcMissionState, str]] = []
        self.tick_index = 0
        self.on_validated = None  # hook(mission_id, station) for trace auditing
        self._declare_tags()

    # -- table layout --------------------------------------------------------

    def _declare_tags(self):
        cfg = self.config
        t = self.table
        for k in range(1, cfg.station_count + 1):
            t.declare(tagnames.pallet_a(k), TagType.BOOL, False)
            t.declare(tagnames.pallet_b(k), TagType.BOOL, False)
            t.declare(tagnames.elev_a(k), TagType.BOOL, True)
            t.declare(tagnames.elev_b(k), TagType.BOOL, False)
            t.declare(tagnames.rfid(k), TagType.STRING, "")
            t.declare(tagnames.stop(k), TagType.BOOL, True, writable=True)
            t.declare(tagnames.elev_cmd(k), TagType.BOOL, False, writable=True)
            t.declare(tagnames.operator_mat(k), TagType.BOOL, False, writable=True)
            t.declare(tagnames.mission_status(k), TagType.STRING, "")
        t.declare(tagnames.QUEUE_SENSOR, TagType.BOOL, False)
        t.declare(tagnames.QUEUE_STOP, TagType.BOOL, True, writable=True)
        t.declare(tagnames.MISSION_REQ, TagType.STRING, "", writable=True)
        t.declare(tagnames.CONF_STATIONS, TagType.INT32, cfg.station_count)
        t.declare(tagnames.CONF_SPEED, TagType.INT32, cfg.conveyor_speed)
        t.declare(tagnames.CONF_TICK_MS, TagType.INT32, cfg.tick_duration)
        t.declare(tagnames.CONF_PALLET_LEN, TagType.INT32, cfg.pallet_length)
        t.declare(tagnames.CONF_PALLET_COUNT, TagType.INT32, cfg.pallet_count)
        t.declare(tagnames.CONF_DWELL_TICKS, TagType.INT32, cfg.amr_dwell_ticks)
        t.declare(
            tagnames.CONF_SEGMENTS,
            TagType.STRING,
            ",".join(str(s) for s in cfg.segment_lengths),
        )
        from ..factory.sim import device_names

        for dev in device_names(cfg):
            t.declare(tagnames.energy(dev), TagType.FLOAT64, 0.0)
        for k in range(1, cfg.station_count + 1):
            t.declare(tagnames.material(k), TagType.INT32, 0)
            t.declare(tagnames.waste(k), TagType.INT32, 0)
        t.freeze()

    # -- data ingestion ------------------------------------------------------

    def ingest_sensors(self, sensors: dict[str, bool | str], tick: int):
        self.tick_index = tick
        for name in sorted(sensors):
            self.table.set(name, sensors[name], tick)

    def ingest_ledger(self, ledger: FlowLedger, tick: int):
        for dev in sorted(ledger.energy_uj):
            self.table.set(tagnames.energy(dev), float(ledger.energy_uj[dev]), tick)
        for k in sorted(ledger.material_units):
            self.table.set(tagnames.material(k), ledger.material_units[k], tick)
            self.table.set(tagnames.waste(k), ledger.waste_units[k], tick)

    # -- control surface (serialized with the scan by the owner loop) --------

    def enqueue_write(self, point: str, value, remote: bool, label: str = "") -> str | None:
        """Queue an actuator write; returns an error code or None."""
        if point not in self.table:
            return "UnknownTag"
        if not self.table.writable(point) or point == tagnames.MISSION_REQ:
            return "ReadOnly"
        if not isinstance(value, bool):
            return "BadPayload"
        if point.startswith("SYS.OPERATOR_MAT_"):
            k = tagnames.station_of(point)
            try:
                self.set_interlock(k, value)
            except UnknownStation:
                return "UnknownTag"
            return None
        self.pending.append(Command(point, value, remote, label))
        return None

    def submit_mission(self, kind: MissionKind, origin: Origin) -> MissionOutcome:
        k = kind.station
        if k < 1 or k > self.config.station_count:
            return MissionOutcome(False, reason=RejectReason.UNKNOWN_STATION)
        if k in self.logic.station_mission:
            return MissionOutcome(False, reason=RejectReason.STATION_BUSY)
        if origin.remote and bool(self.table.value(tagnames.operator_mat(k))):
            return MissionOutcome(False, reason=RejectReason.INTERLOCK_ENGAGED)
        inputs = self.last_inputs or self._input_slice()
        if kind.mission_type in (MissionType.PASS_DOCKING, MissionType.ELEVATOR_UP):
            if not inputs.get(tagnames.pallet_a(k), False):
                return MissionOutcome(False, reason=RejectReason.NO_PALLET)
        else:
            if not inputs.get(tagnames.elev_b(k), False):
                return MissionOutcome(False, reason=RejectReason.NO_PALLET)
        mid = self.logic.next_mission_id
        self.logic.next_mission_id += 1
        self.logic.missions[mid] = PlcMission(mid, kind, origin)
        self.logic.station_mission[k] = mid
        self.transition_log.append((self.tick_index, mid, k, PlcMissionState.VALIDATED, ""))
        # origin and kind ride along so observers can track foreign missions
        self.table.set(
            tagnames.mission_status(k),
            f"{mid}:Validated:{origin.value}:{kind.mission_type.value}",
            self.tick_index,
        )
        if self.on_validated:
            self.on_validated(mid, k)
        return MissionOutcome(True, mission_id=mid)

    def mission_status(self, mission_id: int) -> PlcMissionState:
        try:
            return self.logic.missions[mission_id].state
        except KeyError:
            raise UnknownMission(mission_id) from None

    def mission_record(self, mission_id: int) -> PlcMission:
        try:
            return self.logic.missions[mission_id]
        except KeyError:
            raise UnknownMission(mission_id) from None

    def set_interlock(self, station_id: int, operator_present: bool):
        if station_id < 1 or station_id > self.config.station_count:
            raise UnknownStation(station_id)
        self.table.set(
            tagnames.operator_mat(station_id), operator_present, self.tick_index
        )

    # -- the scan ------------------------------------------------------------

    def _input_slice(self) -> dict[str, bool | str]:
        names = []
        for k in range(1, self.config.station_count + 1):
            names += tagnames.station_sensor_names(k)
            names.append(tagnames.operator_mat(k))
        names.append(tagnames.QUEUE_SENSOR)
        return {n: self.table.value(n) for n in names}

    def _input_quality(self) -> dict[str, Quality]:
        out = {}
        for k in range(1, self.config.station_count + 1):
            for n in tagnames.station_sensor_names(k) + [tagnames.operator_mat(k)]:
                out[n] = self.table.get(n).quality
        out[tagnames.QUEUE_SENSOR] = self.table.get(tagnames.QUEUE_SENSOR).quality
        return out

    def scan(self, tick: int) -> ScanLog:
        self.tick_index = tick
        inputs = self._input_slice()
        commands, self.pending = self.pending, []
        outputs, self.logic, log = scan_cycle(
            inputs, self.logic, commands, self.last_outputs, tick, self._input_quality()
        )
        for point in sorted(outputs):
            self.table.set(point, outputs[point], tick, log.output_quality[point])
        for mid, station, state, reason in log.transitions:
            self.transition_log.append((tick, mid, station, state, reason))
            m = self.logic.missions[mid]
            # self-describing: per-tick batching may collapse intermediate
            # states, so every status text carries origin and kind
            text = f"{mid}:{state.value}:{m.origin.value}:{m.kind.mission_type.value}"
            if reason:
                text += f":{reason}"
            self.table.set(tagnames.mission_status(station), text, tick)
        self.last_inputs = inputs
        self.last_outputs = outputs
        if self.keep_scan_logs:
            self.scan_logs.append(log)
        return log
