"""All four domains in one process on the virtual clock.

Wiring, south to north (links carry encoded frames, so the codec runs
end-to-end even in-process):

    factory <-> PLC <-> device tag server
                              | link pair "gateway-device"
                           gateway (auth, whitelist, bridge)
                              | link pair "core-gateway"
                           twin core

Per factory tick: advance the world, feed sensors to the PLC, scan, push the
actuator image back, publish the tick's tag-change batch. Everything else
(forwarded requests, telemetry, timeouts) is ordinary event traffic.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..config import FactoryConfig
from ..core.estimator import divergence
from ..core.service import DtCore
from ..factory import actuate, build_factory, tick as factory_tick
from ..gateway import Gateway, KeyStore, Whitelist
from ..plc import MissionKind, Origin, Plc
from ..plc.device import DeviceAdapter
from ..plc.tags import TagType
from ..protocol.client import TagClient
from ..protocol.server import ALL_SCOPES, TagServer
from .. import tagnames
from .clock import EventLoop
from .links import Link
from .trace import TraceRecorder


@dataclass
class StackOptions:
    seed: int = 0
    ledger_publish_every: int = 1
    mission_timeout_ms: int = 5000
    keep_scan_logs: bool = True
    trace_types: set[str] | None = None  # None: record everything


@dataclass
class SubmissionResult:
    origin: Origin
    kind: MissionKind
    accepted: bool | None = None   # None until the answer arrives
    plc_mission_id: int | None = None
    twin_mission_id: int | None = None
    reason: str = ""


class InProcessStack:
    def __init__(self, config: FactoryConfig | None = None, options: StackOptions | None = None):
        self.config = (config or FactoryConfig()).validate()
        self.options = options or StackOptions()
        self.loop = EventLoop()
        self.trace = TraceRecorder(include_types=self.options.trace_types)
        self.state = build_factory(self.config)
        self.plc = Plc(self.config)
        self.plc.keep_scan_logs = self.options.keep_scan_logs
        self.adapter = DeviceAdapter(self.plc)

        self.device_keys = KeyStore()
        self._device_secret = self.device_keys.add("device", ALL_SCOPES)
        self.device_server = TagServer(self.adapter, self._device_auth)

        self.north_keys = KeyStore()
        self.secrets = {
            "core": self.north_keys.add("core", ALL_SCOPES),
            "platform": self.north_keys.add("platform", ALL_SCOPES),
        }
        self.whitelist = Whitelist()
        self.gateway = Gateway(
            self.north_keys, self.whitelist, south_key=("device", self._device_secret)
        )
        self.core = DtCore(
            clock=self.loop.now_ms,
            schedule=self.loop.schedule,
            mission_timeout_ms=self.options.mission_timeout_ms,
        )
        self.core.on_event = self._on_core_event
        self.stream_subscribers: list = []
        self.plc.on_validated = self._on_plc_validated

        seed = self.options.seed
        self.link_gw_to_dev = Link(self.loop, "gateway-device:to_south", seed)
        self.link_dev_to_gw = Link(self.loop, "gateway-device:to_north", seed)
        self.link_core_to_gw = Link(self.loop, "core-gateway:to_south", seed)
        self.link_gw_to_core = Link(self.loop, "core-gateway:to_north", seed)
        self.links = {
            ("gateway-device", "to_south"): self.link_gw_to_dev,
            ("gateway-device", "to_north"): self.link_dev_to_gw,
            ("core-gateway", "to_south"): self.link_core_to_gw,
            ("core-gateway", "to_north"): self.link_gw_to_core,
        }

        self.platform_client: TagClient | None = None
        self.submissions: list[SubmissionResult] = []
        self.booted = False
        self._tick_event = None
        # scheduled scenario commands, run just before the numbered tick
        self.before_tick: dict[int, list] = {}

    # -- wiring ------------------------------------------------------------------

    def _device_auth(self, payload, session):
        key_id, _, secret = payload.partition(":")
        return self.device_keys.verify(key_id, secret)

    def boot(self):
        # gateway south leg
        gw_session = self.device_server.connect(self.link_dev_to_gw.send, remote=True)
        gw_session.queue_depth = self.link_dev_to_gw.queue_depth
        self.link_gw_to_dev.connect(
            lambda data: self.device_server.handle_bytes(gw_session, data)
        )
        self.link_dev_to_gw.connect(self.gateway.south_receive)
        self.gateway.attach_south(self.link_gw_to_dev.send)
        self.gateway.bootstrap()
        self.loop.drain_current()
        if not self.gateway.ready:
            raise RuntimeError("gateway bootstrap did not complete")

        # twin core north leg
        core_session = self.gateway.accept_north("127.0.0.1", self.link_gw_to_core.send)
        core_session.queue_depth = self.link_gw_to_core.queue_depth
        self.link_core_to_gw.connect(
            lambda data: self.gateway.north_receive(core_session, data)
        )
        self.link_gw_to_core.connect(self.core.receive)
        self.core.attach_transport(self.link_core_to_gw.send)
        self.core.connect("core", self.secrets["core"])
        self.loop.drain_current()
        if not self.core.ready:
            raise RuntimeError("twin core hydration did not complete")

        # platform entry point: its own authenticated north session
        self.platform_client = TagClient(lambda d: None, name="platform")
        platform_session = self.gateway.accept_north(
            "127.0.0.1", self.platform_client.handle_bytes
        )
        self.platform_client.send_bytes = lambda data: self.gateway.north_receive(
            platform_session, data
        )
        self.platform_client.auth("platform", self.secrets["platform"])
        self.loop.drain_current()

        self._schedule_tick()
        self.booted = True
        return self

    def _on_core_event(self, event: dict):
        self.trace.record(event)
        for subscriber in self.stream_subscribers:
            subscriber(event)

    def _on_plc_validated(self, mission_id: int, station: int):
        self.trace.record(
            {
                "type": "plc_validated",
                "t": self.loop.now_ms(),
                "tick": self.state.tick_index,
                "plc_mission_id": mission_id,
                "station": station,
            }
        )

    # -- the tick --------------------------------------------------------------------

    def _schedule_tick(self):
        self._tick_event = self.loop.schedule(self.config.tick_duration, self._tick)

    def at_tick(self, tick_no: int, fn):
        self.before_tick.setdefault(tick_no, []).append(fn)

    def _tick(self):
        now = self.loop.now_ms()
        tick_no = self.state.tick_index
        for fn in self.before_tick.pop(tick_no, []):
            fn()
        self.state, events = factory_tick(self.state)
        for e in events:
            self.trace.ome(e.tick, e.point_name, e.new_value)
        self.plc.ingest_sensors(self.state.sensors, tick_no)
        every = self.options.ledger_publish_every
        if every > 0 and tick_no % every == 0:
            self.plc.ingest_ledger(self.state.ledger, tick_no)
        log = self.plc.scan(tick_no)
        for point in sorted(log.outputs):
            self.state = actuate(self.state, point, log.outputs[point])
        if log.changes or log.blocked_commands:
            self.trace.record(
                {
                    "type": "scan",
                    "tick": tick_no,
                    "t": now,
                    "present": sorted(k for k, v in log.operator_present.items() if v),
                    "changes": [[c.point, c.value, c.source] for c in log.changes],
                    "blocked": [[c.point, c.value, reason] for c, reason in log.blocked_commands],
                }
            )
        for mid, station, state, reason in log.transitions:
            self.trace.record(
                {
                    "type": "plc_mission",
                    "tick": tick_no,
                    "t": now,
                    "plc_mission_id": mid,
                    "station": station,
                    "state": state.value,
                    "reason": reason,
                }
            )
        changed = self.plc.table.drain_dirty()
        if changed:
            assignments = []
            for name in changed:
                tag = self.plc.table.get(name)
                assignments.append((name, tag.vtype, tag.value))
            self.device_server.publish_changes(assignments, tick=tick_no, ts_ms=now)
        self._schedule_tick()

    def run_ticks(self, n: int):
        for _ in range(n):
            target = self.loop.now_ms() + self.config.tick_duration
            self.loop.run_until(target)

    def run_until_ms(self, t_ms: int):
        self.loop.run_until(t_ms)

    def pause_ticks(self):
        """Stop the world but keep the loop usable (quiescence checks)."""
        if self._tick_event is not None:
            self.loop.cancel(self._tick_event)
            self._tick_event = None

    # -- command entry points (the three origins) -----------------------------------

    def submit_mission(self, origin: Origin, kind: MissionKind) -> SubmissionResult:
        result = SubmissionResult(origin=origin, kind=kind)
        self.submissions.append(result)
        if origin is Origin.HMI:
            outcome = self.plc.submit_mission(kind, origin)
            result.accepted = outcome.accepted
            result.plc_mission_id = outcome.mission_id
            result.reason = outcome.reason.value if outcome.reason else ""
        elif origin is Origin.TWIN:
            record = self.core.request_mission(kind, origin)
            result.twin_mission_id = record.mission_id
        else:
            payload = f"{kind.encode()}:{origin.value}"

            def on_ack(response):
                if response.ok and "mission" in response.lines:
                    result.accepted = True
                    result.plc_mission_id = int(response.lines["mission"].split(":")[1])
                elif response.ok and "rejected" in response.lines:
                    result.accepted = False
                    result.reason = response.lines["rejected"].split(":", 1)[1]
                else:
                    result.accepted = False
                    result.reason = response.error_code

            self.platform_client.write(
                [("DT/" + tagnames.MISSION_REQ, TagType.STRING, payload)], on_ack
            )
        self.loop.drain_current()
        if origin is Origin.TWIN and result.twin_mission_id is not None:
            record = self.core.missions.get(result.twin_mission_id)
            if record.plc_mission_id is not None:
                result.accepted = True
                result.plc_mission_id = record.plc_mission_id
            elif record.reject_reason:
                result.accepted = False
                result.reason = record.reject_reason
        return result

    def set_operator_mat(self, station: int, present: bool):
        """Someone steps on (or off) the mat: a physical-world input."""
        self.plc.set_interlock(station, present)
        self.trace.record(
            {
                "type": "interlock",
                "t": self.loop.now_ms(),
                "tick": self.state.tick_index,
                "station": station,
                "present": present,
            }
        )

    def remote_device_write(self, point: str, value, remote: bool = True) -> str | None:
        """A raw actuator write arriving at the device server (tests/faults)."""
        return self.plc.enqueue_write(point, value, remote=remote, label="direct")

    # -- fault injection ----------------------------------------------------------------

    def inject_delay(self, link: str, direction: str, ms: int):
        self.links[(link, direction)].set_delay(ms)

    def inject_drop(self, link: str, direction: str, probability: float):
        self.links[(link, direction)].set_drop(probability)

    def inject_sever(self, link: str, direction: str, from_tick: int, duration_ticks: int):
        tick_ms = self.config.tick_duration
        self.links[(link, direction)].sever(
            from_tick * tick_ms, duration_ticks * tick_ms
        )

    # -- oracles / verification hooks ------------------------------------------------------

    def mirror_mismatches(self) -> list[tuple[str, str, object, object]]:
        out = []
        for thing_id, thing in sorted(self.core.registry.things.items()):
            for prop, tag in thing.bindings.items():
                south = tag[len("DT/"):]
                want = self.plc.table.value(south)
                got = thing.properties[prop].value
                if want != got:
                    out.append((thing_id, prop, got, want))
        return out

    def divergence_errors(self) -> dict[str, int]:
        estimates = self.core.estimator.estimate(self.loop.now_ms())
        errors = divergence(estimates, self.state)
        for rfid, err in errors.items():
            self.core.metrics.observe_divergence(rfid, err)
        return errors
