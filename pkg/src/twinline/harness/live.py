"""Wall-clock operation of the in-process stack.

The driver thread advances the virtual loop one tick per real tick interval;
HTTP handlers and TCP sessions synchronize with it through one lock, keeping
the single-owner contract of every component intact. Optional TCP listeners
expose the device server and the gateway north side so external tools (the
operator CLI, the dashboard's gateway reads) can join the running stack.
"""

from __future__ import annotations

import threading
import time

from ..config import FactoryConfig
from ..core.api import ApiServer
from ..core.missions import TwinMissionState
from ..plc.plc import MissionKind, MissionType, Origin
from ..protocol.net import TcpTagServer
from .stack import InProcessStack, StackOptions


class LiveRunner:
    def __init__(self, stack: InProcessStack, pace: float = 1.0):
        self.stack = stack
        self.pace = pace
        self.lock = threading.RLock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        self._thread.join(timeout=5)

    def _run(self):
        interval = self.stack.config.tick_duration / 1000.0 / self.pace
        deadline = time.monotonic()
        while not self._stop.is_set():
            deadline += interval
            with self.lock:
                self.stack.run_ticks(1)
            delay = deadline - time.monotonic()
            if delay > 0:
                self._stop.wait(delay)
            else:
                deadline = time.monotonic()


class LiveStack:
    """Runs the whole line live and backs the user-domain API."""

    def __init__(
        self,
        config: FactoryConfig | None = None,
        options: StackOptions | None = None,
        api_host: str = "127.0.0.1",
        api_port: int = 8470,
        device_port: int | None = None,
        gateway_port: int | None = None,
        ui_dir: str | None = None,
        pace: float = 1.0,
    ):
        self.stack = InProcessStack(config, options).boot()
        self.runner = LiveRunner(self.stack, pace)
        self.api = ApiServer(self, api_host, api_port, ui_dir)
        self.device_tcp = None
        self.gateway_tcp = None
        if device_port is not None:
            self.device_tcp = TcpTagServer(
                api_host,
                device_port,
                self.runner.lock,
                accept=self._accept_device,
                receive=self._receive_device,
            )
        if gateway_port is not None:
            self.gateway_tcp = TcpTagServer(
                api_host,
                gateway_port,
                self.runner.lock,
                accept=self.stack.gateway.accept_north,
                receive=self.stack.gateway.north_receive,
            )

    def _accept_device(self, addr: str, send_bytes):
        # external device-side sessions are local HMI-class peers
        return self.stack.device_server.connect(send_bytes, remote=False)

    def _receive_device(self, session, data: bytes):
        self.stack.device_server.handle_bytes(session, data)
        self.stack.loop.drain_current()

    def start(self):
        self.runner.start()
        self.api.start()
        if self.device_tcp:
            self.device_tcp.start()
        if self.gateway_tcp:
            self.gateway_tcp.start()
        return self

    def stop(self):
        self.runner.stop()
        self.api.stop()
        if self.device_tcp:
            self.device_tcp.stop()
        if self.gateway_tcp:
            self.gateway_tcp.stop()

    # -- API backend -----------------------------------------------------------

    def things(self):
        with self.runner.lock:
            return self.stack.core.things_snapshot()

    def thing(self, thing_id: str):
        with self.runner.lock:
            thing = self.stack.core.registry.things.get(thing_id)
            return thing.snapshot() if thing else None

    def missions_list(self):
        with self.runner.lock:
            return [r.to_dict() for r in self.stack.core.missions.records.values()]

    def mission(self, mission_id: int):
        with self.runner.lock:
            record = self.stack.core.missions.get(mission_id)
            return record.to_dict() if record else None

    def post_mission(self, body: dict) -> dict:
        from ..core.api import ApiError

        kind_name = body.get("kind", "")
        station = body.get("station")
        if not isinstance(station, int):
            raise ApiError(400, "station must be an integer")
        if kind_name == "PassDockingStation":
            kind = MissionKind(MissionType.PASS_DOCKING, station)
        elif kind_name == "ElevatorTransfer":
            direction = body.get("direction", "up")
            if direction not in ("up", "down"):
                raise ApiError(400, "direction must be up|down")
            kind = MissionKind.elevator(station, direction == "up")
        else:
            raise ApiError(400, f"unknown kind {kind_name!r}")
        try:
            origin = Origin(str(body.get("origin", "twin")).lower())
        except ValueError:
            raise ApiError(400, "origin must be hmi|platform|twin") from None
        with self.runner.lock:
            record = self.stack.core.request_mission(kind, origin)
            self.stack.loop.drain_current()
            return {"mission_id": record.mission_id, "state": record.state.value}

    def post_interlock(self, body: dict) -> dict:
        from ..core.api import ApiError

        station = body.get("station")
        engaged = body.get("engaged")
        if not isinstance(station, int) or not isinstance(engaged, bool):
            raise ApiError(400, "need integer 'station' and boolean 'engaged'")
        if not 1 <= station <= self.stack.config.station_count:
            raise ApiError(404, "UnknownStation")
        with self.runner.lock:
            self.stack.core.write_interlock(station, engaged)
            self.stack.loop.drain_current()
        return {"station": station, "engaged": engaged}

    def estimates(self) -> dict:
        with self.runner.lock:
            return {
                "t": self.stack.loop.now_ms(),
                "pallets": self.stack.core.estimates(),
            }

    def sync_metrics(self) -> dict:
        with self.runner.lock:
            return self.stack.core.metrics.to_dict()

    def kpi(self, start: int, end: int) -> dict:
        with self.runner.lock:
            return self.stack.core.kpi_report(start, end).to_dict()

    def gateway_metrics_text(self) -> str:
        with self.runner.lock:
            return self.stack.gateway.render_metrics()

    def subscribe_stream(self, put):
        with self.runner.lock:
            self.stack.stream_subscribers.append(put)

        def unsubscribe():
            with self.runner.lock:
                if put in self.stack.stream_subscribers:
                    self.stack.stream_subscribers.remove(put)

        return unsubscribe

    def wait_mission_terminal(self, mission_id: int, timeout_s: float = 10.0):
        deadline = time.monotonic() + timeout_s
        terminal = (
            TwinMissionState.COMPLETED,
            TwinMissionState.REJECTED,
            TwinMissionState.TIMED_OUT,
        )
        while time.monotonic() < deadline:
            with self.runner.lock:
                record = self.stack.core.missions.get(mission_id)
                if record and record.state in terminal:
                    return record.to_dict()
            time.sleep(0.02)
        return None
