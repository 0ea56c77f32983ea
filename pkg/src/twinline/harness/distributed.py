"""Split deployment: each domain in its own process over real sockets.

``twinline init`` writes a runtime bundle (factory config, per-role configs,
fresh app keys with plaintext copies on the client side only); ``twinline
serve --role ...`` hosts one role from that bundle. Wall-clock operation is
inherently non-reproducible; deterministic verification belongs to the
in-process topology.
"""

from __future__ import annotations

import os
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..config import FactoryConfig, load_kv_file
from ..core.api import ApiServer
from ..core.service import DtCore
from ..factory import actuate, build_factory, tick as factory_tick
from ..gateway import Gateway, KeyStore, Whitelist
from ..plc import Plc
from ..plc.device import DeviceAdapter
from ..protocol.net import TcpTagClient, TcpTagServer
from ..protocol.server import ALL_SCOPES, TagServer

DEFAULT_DEVICE_PORT = 47808
DEFAULT_GATEWAY_PORT = 47809
DEFAULT_API_PORT = 8470
DEFAULT_METRICS_PORT = 8471


def _hostport(text: str, default_port: int) -> tuple[str, int]:
    if ":" in text:
        host, port = text.rsplit(":", 1)
        return host, int(port)
    return text, default_port


def write_bundle(out_dir: str, config: FactoryConfig, host: str = "127.0.0.1",
                 ports: dict | None = None) -> dict:
    """Generate the runtime bundle; returns the plaintext secrets."""
    os.makedirs(out_dir, exist_ok=True)
    ports = ports or {}
    device_port = ports.get("device", DEFAULT_DEVICE_PORT)
    gateway_port = ports.get("gateway", DEFAULT_GATEWAY_PORT)
    api_port = ports.get("api", DEFAULT_API_PORT)
    metrics_port = ports.get("metrics", DEFAULT_METRICS_PORT)

    device_keys = KeyStore()
    device_secret = device_keys.add("device", ALL_SCOPES)
    north_keys = KeyStore()
    secrets = {
        name: north_keys.add(name, ALL_SCOPES)
        for name in ("core", "platform", "operator")
    }

    lines = []
    for field in (
        "station_count", "conveyor_speed", "tick_duration", "pallet_count",
        "pallet_length", "min_gap", "approach_offset", "amr_dwell_ticks",
        "elevator_travel_ticks", "material_per_pass", "waste_per_pass", "rng_seed",
    ):
        lines.append(f"{field} = {getattr(config, field)}")
    lines.append("segment_lengths = " + ",".join(str(s) for s in config.segment_lengths))
    for field in vars(config.energy):
        lines.append(f"energy.{field} = {getattr(config.energy, field)}")
    _write(out_dir, "factory.cfg", lines)

    _write(out_dir, "device.cfg", [
        f"listen = {host}:{device_port}",
        *device_keys.config_lines(),
    ])
    _write(out_dir, "gateway.cfg", [
        f"listen = {host}:{gateway_port}",
        f"south = {host}:{device_port}",
        f"south_key = device:{device_secret}",
        f"metrics_listen = {host}:{metrics_port}",
        *north_keys.config_lines(),
    ])
    _write(out_dir, "core.cfg", [
        f"api = {host}:{api_port}",
        f"gateway = {host}:{gateway_port}",
        f"north_key = core:{secrets['core']}",
    ])
    _write(out_dir, "operator.cfg", [
        f"api = http://{host}:{api_port}",
        f"gateway = {host}:{gateway_port}",
        f"key = operator:{secrets['operator']}",
        f"platform_key = platform:{secrets['platform']}",
    ])
    return {"device": device_secret, **secrets}


def _write(out_dir: str, name: str, lines: list[str]):
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


class DeviceNode:
    """OME simulation + soft PLC + device tag server on a socket."""

    def __init__(self, bundle_dir: str, out_dir: str | None = None):
        self.config = FactoryConfig.from_file(os.path.join(bundle_dir, "factory.cfg"))
        pairs = load_kv_file(os.path.join(bundle_dir, "device.cfg"))
        kv = dict(pairs)
        self.listen = _hostport(kv.get("listen", ""), DEFAULT_DEVICE_PORT)
        self.keys = KeyStore.from_pairs(pairs)
        self.state = build_factory(self.config)
        self.plc = Plc(self.config)
        self.plc.keep_scan_logs = False
        self.adapter = DeviceAdapter(self.plc)
        self.server = TagServer(self.adapter, self._auth)
        self.lock = threading.RLock()
        self.tcp = TcpTagServer(
            self.listen[0], self.listen[1], self.lock,
            accept=lambda addr, send: self.server.connect(send, remote=True),
            receive=self.server.handle_bytes,
        )
        self.out_dir = out_dir
        self._events_fh = None
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            self._events_fh = open(
                os.path.join(out_dir, "events.trace"), "w", encoding="utf-8"
            )
        self._stop = threading.Event()
        self._ticker = threading.Thread(target=self._run, daemon=True)

    def _auth(self, payload, session):
        key_id, _, secret = payload.partition(":")
        return self.keys.verify(key_id, secret)

    def start(self):
        self.tcp.start()
        self._ticker.start()
        return self

    def stop(self):
        self._stop.set()
        self._ticker.join(timeout=5)
        self.tcp.stop()
        if self._events_fh:
            self._events_fh.close()

    def _run(self):
        interval = self.config.tick_duration / 1000.0
        deadline = time.monotonic()
        epoch = time.monotonic()
        while not self._stop.is_set():
            deadline += interval
            with self.lock:
                tick_no = self.state.tick_index
                self.state, events = factory_tick(self.state)
                if self._events_fh:
                    for e in events:
                        value = "1" if e.new_value is True else (
                            "0" if e.new_value is False else str(e.new_value))
                        self._events_fh.write(f"{e.tick},{e.point_name},{value}\n")
                self.plc.ingest_sensors(self.state.sensors, tick_no)
                self.plc.ingest_ledger(self.state.ledger, tick_no)
                log = self.plc.scan(tick_no)
                for point in sorted(log.outputs):
                    self.state = actuate(self.state, point, log.outputs[point])
                changed = self.plc.table.drain_dirty()
                if changed:
                    assignments = [
                        (n, self.plc.table.get(n).vtype, self.plc.table.get(n).value)
                        for n in changed
                    ]
                    now_ms = int((time.monotonic() - epoch) * 1000)
                    self.server.publish_changes(assignments, tick=tick_no, ts_ms=now_ms)
            delay = deadline - time.monotonic()
            if delay > 0:
                self._stop.wait(delay)
            else:
                deadline = time.monotonic()


class GatewayNode:
    def __init__(self, bundle_dir: str):
        pairs = load_kv_file(os.path.join(bundle_dir, "gateway.cfg"))
        kv = dict(pairs)
        self.listen = _hostport(kv.get("listen", ""), DEFAULT_GATEWAY_PORT)
        self.south_addr = _hostport(kv.get("south", ""), DEFAULT_DEVICE_PORT)
        self.metrics_listen = _hostport(kv.get("metrics_listen", ""), DEFAULT_METRICS_PORT)
        south_id, _, south_secret = kv.get("south_key", "device:").partition(":")
        self.gateway = Gateway(
            KeyStore.from_pairs(pairs),
            Whitelist.from_pairs(pairs),
            south_key=(south_id, south_secret),
        )
        for key, value in pairs:
            if key.startswith("bridge."):
                south, _, direction = value.rpartition(":")
                self.gateway.map_overrides.append((key[len("bridge."):], south, direction))
        self.lock = threading.RLock()
        self.south_tcp: TcpTagClient | None = None
        self.north_tcp = TcpTagServer(
            self.listen[0], self.listen[1], self.lock,
            accept=self.gateway.accept_north,
            receive=self.gateway.north_receive,
        )
        gw = self.gateway

        class MetricsHandler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def do_GET(self):
                if self.path != "/metrics":
                    self.send_response(404)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                body = gw.render_metrics().encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "text/plain; charset=utf-8")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self.metrics_server = ThreadingHTTPServer(self.metrics_listen, MetricsHandler)
        self.metrics_server.daemon_threads = True
        self._metrics_thread = threading.Thread(
            target=self.metrics_server.serve_forever, daemon=True
        )

    def start(self):
        self.south_tcp = TcpTagClient(
            self.south_addr[0], self.south_addr[1], self.lock,
            receive=self.gateway.south_receive,
        )
        self.gateway.attach_south(self.south_tcp.send_bytes)
        with self.lock:
            self.gateway.bootstrap()
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline and not self.gateway.ready:
            time.sleep(0.05)
        if not self.gateway.ready:
            raise RuntimeError("gateway could not bootstrap against the device server")
        self.north_tcp.start()
        self._metrics_thread.start()
        return self

    def stop(self):
        self.north_tcp.stop()
        self.metrics_server.shutdown()
        self.metrics_server.server_close()
        if self.south_tcp:
            self.south_tcp.close()


class CoreNode:
    """Twin core over a real gateway link, serving the user-domain API."""

    def __init__(self, bundle_dir: str, ui_dir: str | None = None):
        pairs = load_kv_file(os.path.join(bundle_dir, "core.cfg"))
        kv = dict(pairs)
        self.api_listen = _hostport(kv.get("api", ""), DEFAULT_API_PORT)
        self.gateway_addr = _hostport(kv.get("gateway", ""), DEFAULT_GATEWAY_PORT)
        self.key_id, _, self.secret = kv.get("north_key", "core:").partition(":")
        self.lock = threading.RLock()
        self._epoch = time.monotonic()
        self.core = DtCore(clock=self._clock, schedule=self._schedule)
        self.core.on_event = self._fanout
        self.subscribers: list = []
        self.tcp: TcpTagClient | None = None
        self.api = ApiServer(self, self.api_listen[0], self.api_listen[1], ui_dir)

    def _clock(self) -> int:
        return int((time.monotonic() - self._epoch) * 1000)

    def _schedule(self, delay_ms: int, fn):
        timer = threading.Timer(delay_ms / 1000.0, lambda: self._locked(fn))
        timer.daemon = True
        timer.start()
        return timer

    def _locked(self, fn):
        with self.lock:
            fn()

    def _fanout(self, event: dict):
        for put in list(self.subscribers):
            put(event)

    def start(self):
        self.tcp = TcpTagClient(
            self.gateway_addr[0], self.gateway_addr[1], self.lock,
            receive=self.core.receive,
        )
        self.core.attach_transport(self.tcp.send_bytes)
        with self.lock:
            self.core.connect(self.key_id, self.secret)
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline and not self.core.ready:
            time.sleep(0.05)
        if not self.core.ready:
            raise RuntimeError("twin core could not hydrate through the gateway")
        self.api.start()
        return self

    def stop(self):
        self.api.stop()
        if self.tcp:
            self.tcp.close()

    # -- API backend (same duck type as the live stack) ---------------------------

    def things(self):
        with self.lock:
            return self.core.things_snapshot()

    def thing(self, thing_id: str):
        with self.lock:
            thing = self.core.registry.things.get(thing_id)
            return thing.snapshot() if thing else None

    def missions_list(self):
        with self.lock:
            return [r.to_dict() for r in self.core.missions.records.values()]

    def mission(self, mission_id: int):
        with self.lock:
            record = self.core.missions.get(mission_id)
            return record.to_dict() if record else None

    def post_mission(self, body: dict) -> dict:
        from ..core.api import ApiError
        from ..plc.plc import MissionKind, MissionType, Origin

        kind_name = body.get("kind", "")
        station = body.get("station")
        if not isinstance(station, int):
            raise ApiError(400, "station must be an integer")
        if kind_name == "PassDockingStation":
            kind = MissionKind(MissionType.PASS_DOCKING, station)
        elif kind_name == "ElevatorTransfer":
            kind = MissionKind.elevator(station, body.get("direction", "up") == "up")
        else:
            raise ApiError(400, f"unknown kind {kind_name!r}")
        try:
            origin = Origin(str(body.get("origin", "twin")).lower())
        except ValueError:
            raise ApiError(400, "origin must be hmi|platform|twin") from None
        with self.lock:
            record = self.core.request_mission(kind, origin)
        return {"mission_id": record.mission_id, "state": record.state.value}

    def post_interlock(self, body: dict) -> dict:
        from ..core.api import ApiError

        station = body.get("station")
        engaged = body.get("engaged")
        if not isinstance(station, int) or not isinstance(engaged, bool):
            raise ApiError(400, "need integer 'station' and boolean 'engaged'")
        with self.lock:
            self.core.write_interlock(station, engaged)
        return {"station": station, "engaged": engaged}

    def estimates(self) -> dict:
        with self.lock:
            return {"t": self._clock(), "pallets": self.core.estimates()}

    def sync_metrics(self) -> dict:
        with self.lock:
            return self.core.metrics.to_dict()

    def kpi(self, start: int, end: int) -> dict:
        with self.lock:
            return self.core.kpi_report(start, end).to_dict()

    def gateway_metrics_text(self):
        return None

    def subscribe_stream(self, put):
        with self.lock:
            self.subscribers.append(put)

        def unsubscribe():
            with self.lock:
                if put in self.subscribers:
                    self.subscribers.remove(put)

        return unsubscribe
