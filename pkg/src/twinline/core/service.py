"""The twin core service: hydrates the Thing model over the gateway, applies
telemetry, runs the mission handshake, estimates pallets, accumulates KPIs,
and fans events out to the user-domain stream."""

from __future__ import annotations

from typing import Callable

from .. import tagnames
from ..config import FactoryConfig
from ..plc.plc import MissionKind, Origin
from ..plc.tags import TagType
from ..protocol.client import TagClient
from .estimator import PalletEstimator
from .kpi import KpiStore
from .missions import TERMINAL, MissionLog, MissionRecord, TwinMissionState
from .model import EventDecl, PropertyDecl, ThingRegistry, ThingShape, ThingTemplate
from .telemetry import SyncMetrics, apply_telemetry

DEFAULT_MISSION_TIMEOUT_MS = 5000
NORTH = "DT/"


class DtCore:
    def __init__(
        self,
        clock: Callable[[], int],
        schedule: Callable[[int, Callable[[], None]], object],
        mission_timeout_ms: int = DEFAULT_MISSION_TIMEOUT_MS,
    ):
        self.clock = clock
        self.schedule = schedule
        self.mission_timeout_ms = mission_timeout_ms
        self.client = TagClient(lambda data: None, name="dt-core")
        self.client.on_publish = self._on_publish
        self.registry = ThingRegistry()
        self.metrics = SyncMetrics()
        self.kpi = KpiStore()
        self.missions = MissionLog()
        self.estimator: PalletEstimator | None = None
        self.line_config: FactoryConfig | None = None
        self.station_count = 0
        self.ready = False
        self.stale = False
        self.last_publish_tick = 0
        self.on_event: Callable[[dict], None] | None = None  # stream + trace hook
        self._on_ready: Callable[[], None] | None = None

    # -- transport -----------------------------------------------------------

    def attach_transport(self, send_bytes: Callable[[bytes], None]):
        self.client.send_bytes = send_bytes

    def receive(self, data: bytes):
        self.client.handle_bytes(data)

    def connect(self, key_id: str, secret: str, on_ready: Callable[[], None] | None = None):
        self._on_ready = on_ready

        def on_read(response):
            if response.ok:
                self._hydrate(response.assignments)

        def on_subscribed(response):
            self.client.read([NORTH + "*"], on_read)

        def on_auth(response):
            if response.ok:
                self.client.subscribe([NORTH + "*"], on_subscribed)
            else:
                self._emit({"type": "error", "error": "auth", "code": response.error_code})

        self.client.auth(key_id, secret, on_auth)

    # -- hydration -------------------------------------------------------------

    def _hydrate(self, assignments):
        snapshot = {name: (vtype, value) for name, vtype, value in assignments}

        def conf(tag, default=0):
            return snapshot.get(NORTH + tag, (None, default))[1]

        segments = [
            int(s)
            for s in str(conf(tagnames.CONF_SEGMENTS, "")).split(",")
            if s.strip()
        ]
        config = FactoryConfig(
            station_count=int(conf(tagnames.CONF_STATIONS, 6)),
            segment_lengths=segments,
            conveyor_speed=int(conf(tagnames.CONF_SPEED, 100)),
            tick_duration=int(conf(tagnames.CONF_TICK_MS, 50)),
            pallet_count=int(conf(tagnames.CONF_PALLET_COUNT, 0)),
            amr_dwell_ticks=int(conf(tagnames.CONF_DWELL_TICKS, 0)),
        )
        self.line_config = config
        self.station_count = config.station_count
        self.estimator = PalletEstimator(config)
        self.registry = ThingRegistry(known_tags=set(snapshot))
        self._register_default_model(sorted(snapshot))
        # seed properties and estimator beliefs from the hydration snapshot
        # (no replication on hydration: nothing was requested yet)
        for tag, (_vtype, value) in snapshot.items():
            for thing, prop in self.registry.lookup_tag(tag):
                pv = thing.properties[prop]
                pv.value = value
                pv.timestamp = 0
            self._route_extra(tag, value, 0, self.clock(), 0, released=[])
        self.ready = True
        self._emit({"type": "ready", "t": self.clock()})
        if self._on_ready:
            self._on_ready()

    def _register_default_model(self, known_tags: list[str]):
        station_shape = ThingShape(
            name="docking-station",
            properties=[
                PropertyDecl("PALLET_A", TagType.BOOL),
                PropertyDecl("PALLET_B", TagType.BOOL),
                PropertyDecl("ELEV_A", TagType.BOOL),
                PropertyDecl("ELEV_B", TagType.BOOL),
                PropertyDecl("RFID", TagType.STRING),
                PropertyDecl("STOP", TagType.BOOL),
                PropertyDecl("ELEV_CMD", TagType.BOOL),
                PropertyDecl("OPERATOR_MAT", TagType.BOOL),
                PropertyDecl("MISSION", TagType.STRING),
            ],
            events=[
                EventDecl("PalletArrived", "PALLET_A", "rising"),
                EventDecl("PalletDeparted", "PALLET_A", "falling"),
                EventDecl("StopReleased", "STOP", "falling"),
                EventDecl("StopEngaged", "STOP", "rising"),
                EventDecl("ElevatorUp", "ELEV_B", "rising"),
                EventDecl("ElevatorDown", "ELEV_A", "rising"),
                EventDecl("OperatorPresent", "OPERATOR_MAT", "rising"),
                EventDecl("OperatorLeft", "OPERATOR_MAT", "falling"),
            ],
        )
        line_shape = ThingShape(
            name="line",
            properties=[
                PropertyDecl("QUEUE_SENSOR", TagType.BOOL),
                PropertyDecl("QUEUE_STOP", TagType.BOOL),
                PropertyDecl("STATIONS", TagType.INT32),
                PropertyDecl("SPEED", TagType.INT32),
                PropertyDecl("TICK_MS", TagType.INT32),
                PropertyDecl("PALLET_COUNT", TagType.INT32),
                PropertyDecl("SEGMENTS", TagType.STRING),
            ],
            events=[
                EventDecl("QueuePallet", "QUEUE_SENSOR", "rising"),
            ],
        )
        self.registry.register_template(ThingTemplate("station", [station_shape]))
        self.registry.register_template(ThingTemplate("line", [line_shape]))

        for k in range(1, self.station_count + 1):
            self.registry.instantiate(
                "station",
                f"ST{k}",
                {
                    "PALLET_A": NORTH + tagnames.pallet_a(k),
                    "PALLET_B": NORTH + tagnames.pallet_b(k),
                    "ELEV_A": NORTH + tagnames.elev_a(k),
                    "ELEV_B": NORTH + tagnames.elev_b(k),
                    "RFID": NORTH + tagnames.rfid(k),
                    "STOP": NORTH + tagnames.stop(k),
                    "ELEV_CMD": NORTH + tagnames.elev_cmd(k),
                    "OPERATOR_MAT": NORTH + tagnames.operator_mat(k),
                    "MISSION": NORTH + tagnames.mission_status(k),
                },
            )
        self.registry.instantiate(
            "line",
            "LINE",
            {
                "QUEUE_SENSOR": NORTH + tagnames.QUEUE_SENSOR,
                "QUEUE_STOP": NORTH + tagnames.QUEUE_STOP,
                "STATIONS": NORTH + tagnames.CONF_STATIONS,
                "SPEED": NORTH + tagnames.CONF_SPEED,
                "TICK_MS": NORTH + tagnames.CONF_TICK_MS,
                "PALLET_COUNT": NORTH + tagnames.CONF_PALLET_COUNT,
                "SEGMENTS": NORTH + tagnames.CONF_SEGMENTS,
            },
        )
        # flow counters: one dynamically-shaped thing over whatever the line exports
        flow_props, flow_bindings = [], {}
        for tag in known_tags:
            bare = tag[len(NORTH):]
            if bare.startswith("SYS.ENERGY_"):
                prop = bare[len("SYS."):]
                flow_props.append(PropertyDecl(prop, TagType.FLOAT64))
                flow_bindings[prop] = tag
            elif bare.startswith(("SYS.MAT_", "SYS.WASTE_")):
                prop = bare[len("SYS."):]
                flow_props.append(PropertyDecl(prop, TagType.INT32))
                flow_bindings[prop] = tag
        self.registry.register_template(
            ThingTemplate("flows", [ThingShape("flow-counters", flow_props)])
        )
        self.registry.instantiate("flows", "FLOWS", flow_bindings)

    # -- telemetry ---------------------------------------------------------------

    def _on_publish(self, control: dict[str, str], assignments):
        now = self.clock()
        tick = int(control.get("tick", "0") or 0)
        source_ts = int(control.get("ts", "0") or 0)
        self.last_publish_tick = max(self.last_publish_tick, tick)
        if self.stale:
            self.stale = False
            self._emit({"type": "fresh", "t": now})
        fired = apply_telemetry(self.registry, control, assignments, now, self.metrics)
        for event in fired:
            self._emit({"type": "thing_event", "t": now, **event.to_dict()})
        released = []
        for tag, _vtype, value in assignments:
            self._route_extra(tag, value, source_ts, now, tick, released)
        # replication is resolved after the whole batch: the mission status
        # describing the release may sit later in the same batch
        for station in released:
            self._maybe_replicate(station, now)
        if self.estimator and self.on_event:
            self._emit(
                {
                    "type": "estimates",
                    "t": now,
                    "tick": tick,
                    "pallets": [e.to_dict() for e in self.estimator.estimate(now)],
                }
            )

    def _route_extra(
        self, tag: str, value, source_ts: int, receipt_ts: int, tick: int, released: list
    ):
        if not tag.startswith(NORTH):
            return
        bare = tag[len(NORTH):]
        station = tagnames.station_of(bare)
        if self.estimator is not None and station is not None:
            if bare == tagnames.rfid(station):
                self.estimator.on_rfid(station, str(value), source_ts, receipt_ts)
            elif bare == tagnames.stop(station):
                self.estimator.on_stop_state(station, bool(value), source_ts, receipt_ts)
                if value is False:
                    released.append(station)
        if self.estimator is not None and bare == tagnames.QUEUE_STOP:
            self.estimator.on_stop_state(0, bool(value), source_ts, receipt_ts)
        if bare.startswith(("SYS.ENERGY_", "SYS.MAT_", "SYS.WASTE_")):
            self.kpi.record(tag, tick, int(value))
        if bare.startswith("SYS.MISSION_ST") and value:
            suffix = bare[len("SYS.MISSION_ST"):]
            if suffix.isdigit():
                self._on_mission_status(int(suffix), str(value), receipt_ts)

    # -- the master-slave handshake ------------------------------------------------

    def request_mission(self, kind: MissionKind, origin: Origin) -> MissionRecord:
        now = self.clock()
        record = self.missions.create(kind, origin, now)
        self._emit_mission(record)
        payload_value = f"{kind.encode()}:{origin.value}"

        def on_ack(response):
            self._on_mission_ack(record, response)

        self.client.write(
            [(NORTH + tagnames.MISSION_REQ, TagType.STRING, payload_value)], on_ack
        )
        self.schedule(self.mission_timeout_ms, lambda: self._timeout(record))
        return record

    def _on_mission_ack(self, record: MissionRecord, response):
        now = self.clock()
        if record.state in TERMINAL:
            self.metrics.counters["late_mission_acks"] += 1
            return
        if response.ok and "mission" in response.lines:
            plc_id = int(response.lines["mission"].split(":", 1)[1])
            record.plc_mission_id = plc_id
            self.missions.by_plc_id[plc_id] = record.mission_id
            self.missions.transition(record, TwinMissionState.VALIDATED, now)
        elif response.ok and "rejected" in response.lines:
            reason = response.lines["rejected"].split(":", 1)[1]
            self.missions.transition(record, TwinMissionState.REJECTED, now, reason)
        else:
            code = response.error_code or "Unauthorized"
            self.missions.transition(record, TwinMissionState.REJECTED, now, code)
        self._emit_mission(record)

    def _on_mission_status(self, station: int, text: str, now: int):
        # wire format: "<plc_id>:<state>:<origin>:<kind>[:<reason>]"
        parts = text.split(":")
        if len(parts) < 4:
            return
        try:
            plc_id = int(parts[0])
            origin = Origin(parts[2])
            from ..plc.plc import MissionType

            mtype = MissionType(parts[3])
        except ValueError:
            return
        state_text = parts[1]
        reason = parts[4] if len(parts) > 4 else ""
        twin_state = {
            "Validated": TwinMissionState.VALIDATED,
            "Executing": TwinMissionState.EXECUTING,
            "Completed": TwinMissionState.COMPLETED,
            "Failed": TwinMissionState.REJECTED,
        }.get(state_text)
        if twin_state is None:
            return
        if twin_state is TwinMissionState.REJECTED and not reason:
            reason = "Failed"
        record = self.missions.by_plc(plc_id)
        if record is None:
            # someone else's mission (HMI screen, platform client): shadow it
            record = self.missions.shadow(
                plc_id, MissionKind(mtype, station), origin, twin_state, now, reason
            )
            self._emit_mission(record)
            return
        if record.state in TERMINAL:
            return
        if self.missions.transition(record, twin_state, now, reason):
            self._emit_mission(record)

    def _maybe_replicate(self, station: int, now: int):
        """The stop released for a validated mission: the twin may now mirror
        the motion. This is the only path that moves the twin for a mission."""
        record = self.missions.open_at_station(station)
        if record is None or record.replicated_at is not None:
            return
        record.replicated_at = now
        requested = record.timestamps.get(TwinMissionState.REQUESTED.value)
        if requested is not None:
            self.metrics.mission_rtt.observe(now - requested)
        self._emit(
            {
                "type": "twin_replicate",
                "t": now,
                "mission_id": record.mission_id,
                "plc_mission_id": record.plc_mission_id,
                "station": station,
                "validated_at": record.timestamps.get(TwinMissionState.VALIDATED.value),
            }
        )

    def _timeout(self, record: MissionRecord):
        now = self.clock()
        if record.state in TERMINAL:
            return
        self.missions.transition(record, TwinMissionState.TIMED_OUT, now)
        self.metrics.counters["mission_timeouts"] += 1
        self.stale = True
        for thing in self.registry.things.values():
            thing.mark_stale()
        self._emit({"type": "stale", "t": now, "mission_id": record.mission_id})
        self._emit_mission(record)

    # -- interlock passthrough -------------------------------------------------------

    def write_interlock(self, station: int, engaged: bool, callback=None):
        self.client.write(
            [(NORTH + tagnames.operator_mat(station), TagType.BOOL, engaged)],
            callback,
        )

    # -- snapshots for the user domain -------------------------------------------------

    def estimates(self) -> list[dict]:
        if not self.estimator:
            return []
        return [e.to_dict() for e in self.estimator.estimate(self.clock())]

    def things_snapshot(self) -> list[dict]:
        return [t.snapshot() for _, t in sorted(self.registry.things.items())]

    def kpi_report(self, from_tick: int, to_tick: int):
        return self.kpi.report(from_tick, to_tick, self.station_count)

    # -- stream ------------------------------------------------------------------------

    def _emit_mission(self, record: MissionRecord):
        self._emit({"type": "mission", "t": self.clock(), **record.to_dict()})

    def _emit(self, event: dict):
        if self.on_event:
            self.on_event(event)
