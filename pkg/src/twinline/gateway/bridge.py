"""The middleware hop between the twin core and the device tag server.

North side: a tag-protocol server with app-key auth and per-scope access, only
reachable by whitelisted addresses. South side: a tag-protocol client session
to the device server. Requests are forwarded with names rewritten through the
bridge map; responses and publishes travel back the same way. Nothing
unauthenticated ever crosses to the south side, and per-session order is
preserved (the links are FIFO and forwarding is one-to-one).
"""

from __future__ import annotations

from collections import Counter
from typing import Callable

from .. import tagnames
from ..protocol.client import TagClient
from ..protocol.server import (
    SCOPE_MISSION,
    SCOPE_READ,
    SCOPE_WRITE,
    ServerSession,
    TagServer,
)
from .keys import KeyStore
from .whitelist import Whitelist

NORTH_READ = "NorthRead"
NORTH_WRITE = "NorthWrite"
BOTH = "Both"
NORTH_PREFIX = "DT/"


class BridgeEntry:
    __slots__ = ("north", "south", "direction")

    def __init__(self, north: str, south: str, direction: str):
        if direction not in (NORTH_READ, NORTH_WRITE, BOTH):
            raise ValueError(f"bad direction {direction!r}")
        self.north = north
        self.south = south
        self.direction = direction


class BridgeMap:
    def __init__(self):
        self.by_north: dict[str, BridgeEntry] = {}
        self.by_south: dict[str, BridgeEntry] = {}

    def add(self, north: str, south: str, direction: str):
        if north in self.by_north:
            raise ValueError(f"north name {north!r} already mapped")
        if south in self.by_south:
            raise ValueError(f"south tag {south!r} already mapped")
        entry = BridgeEntry(north, south, direction)
        self.by_north[north] = entry
        self.by_south[south] = entry

    def match_north(self, pattern: str) -> list[str]:
        if pattern.endswith("*"):
            prefix = pattern[:-1]
            return sorted(n for n in self.by_north if n.startswith(prefix))
        return [pattern] if pattern in self.by_north else []

    @staticmethod
    def default_direction(south_name: str) -> str:
        if south_name == tagnames.MISSION_REQ:
            return BOTH
        if (
            south_name.endswith(".STOP")
            or south_name.endswith(".ELEV_CMD")
            or south_name == tagnames.QUEUE_STOP
            or south_name.startswith("SYS.OPERATOR_MAT_")
        ):
            return BOTH
        return NORTH_READ


class _NorthServer(TagServer):
    """North-side protocol endpoint; READ/WRITE forward through the bridge."""

    def __init__(self, gateway: "Gateway"):
        super().__init__(backend=None, authenticator=gateway._authenticate)
        self.gateway = gateway

    def handle_frame(self, session: ServerSession, frame):
        gw = self.gateway
        gw.counters["north_frames_in"] += 1
        if session.authenticated:
            key = gw.keystore.keys.get(session.key_id)
            if key is None or key.revoked:
                gw.counters["denied_revoked"] += 1
                self._error(session, frame.seq, "Revoked")
                return
            gw.counters[f"requests_total.{session.key_id}"] += 1
        super().handle_frame(session, frame)

    def _handle_read(self, session, seq, text):
        gw = self.gateway
        if SCOPE_READ not in session.scopes:
            gw.counters["denied_scope"] += 1
            self._error(session, seq, "Unauthorized")
            return
        patterns = [line for line in text.split("\n") if line] or [NORTH_PREFIX + "*"]
        north_names: list[str] = []
        seen = set()
        for pattern in patterns:
            matched = gw.map.match_north(pattern)
            if not matched and not pattern.endswith("*"):
                gw.counters["unmapped"] += 1
                self._error(session, seq, "UnmappedTag")
                return
            for n in matched:
                entry = gw.map.by_north[n]
                if entry.direction == NORTH_WRITE:
                    if pattern.endswith("*"):
                        continue  # wildcard skips write-only entries
                    gw.counters["denied_direction"] += 1
                    self._error(session, seq, "DirectionDenied")
                    return
                if n not in seen:
                    seen.add(n)
                    north_names.append(n)
        gw.forward_read(session, seq, sorted(north_names))

    def _handle_write(self, session, seq, text):
        gw = self.gateway
        from ..protocol.payload import PayloadError, parse_assignments

        try:
            assignments = parse_assignments(text)
        except PayloadError:
            self._error(session, seq, "BadPayload")
            return
        if not assignments:
            self._error(session, seq, "BadPayload")
            return
        south_assignments = []
        for north_name, vtype, value in assignments:
            entry = gw.map.by_north.get(north_name)
            if entry is None:
                gw.counters["unmapped"] += 1
                self._error(session, seq, "UnmappedTag")
                return
            if entry.direction == NORTH_READ:
                gw.counters["denied_direction"] += 1
                self._error(session, seq, "DirectionDenied")
                return
            needed = SCOPE_MISSION if entry.south == tagnames.MISSION_REQ else SCOPE_WRITE
            if needed not in session.scopes:
                gw.counters["denied_scope"] += 1
                self._error(session, seq, "Unauthorized")
                return
            south_assignments.append((entry.south, vtype, value))
        gw.forward_write(session, seq, south_assignments)


class Gateway:
    def __init__(
        self,
        keystore: KeyStore,
        whitelist: Whitelist,
        south_key: tuple[str, str] = ("device", ""),
    ):
        self.keystore = keystore
        self.whitelist = whitelist
        self.south_key = south_key
        self.map = BridgeMap()
        self.map_overrides: list[tuple[str, str, str]] = []
        self.north = _NorthServer(self)
        self.south = TagClient(send_bytes=lambda data: None, name="gateway-south")
        self.south.on_publish = self._on_south_publish
        self.counters: Counter = Counter()
        self.ready = False
        self.on_ready: Callable[[], None] | None = None

    # -- north lifecycle -------------------------------------------------------

    def accept_north(self, remote_address: str, send_bytes) -> ServerSession | None:
        """Whitelist gate; runs before any protocol byte is parsed."""
        if not self.whitelist.admit(remote_address):
            self.counters["denied_whitelist"] += 1
            return None
        self.counters["sessions_total"] += 1

        def counted_send(data: bytes):
            self.counters["north_frames_out"] += 1
            self.counters["north_bytes_out"] += len(data)
            send_bytes(data)

        return self.north.connect(counted_send, remote=True)

    def north_receive(self, session: ServerSession, data: bytes):
        self.counters["north_bytes_in"] += len(data)
        self.north.handle_bytes(session, data)

    def _authenticate(self, payload: str, session):
        key_id, sep, secret = payload.partition(":")
        if not sep:
            self.counters["denied_auth"] += 1
            return False, "BadKey"
        ok, result = self.keystore.verify(key_id, secret)
        if not ok:
            self.counters["denied_auth"] += 1
        return ok, result

    # -- south lifecycle -------------------------------------------------------

    def attach_south(self, send_bytes):
        def counted_send(data: bytes):
            self.counters["south_frames_out"] += 1
            self.counters["south_bytes_out"] += len(data)
            send_bytes(data)

        self.south.send_bytes = counted_send

    def south_receive(self, data: bytes):
        self.counters["south_bytes_in"] += len(data)
        self.counters["south_frames_in"] += 1
        self.south.handle_bytes(data)

    def bootstrap(self):
        """South handshake: authenticate, subscribe to everything, then read
        the full table once to build the bridge map."""
        key_id, secret = self.south_key

        def on_read(response):
            if response.ok:
                for south_name, _, _ in response.assignments:
                    if south_name in self.map.by_south:
                        continue
                    self.map.add(
                        NORTH_PREFIX + south_name,
                        south_name,
                        BridgeMap.default_direction(south_name),
                    )
                self.ready = True
                if self.on_ready:
                    self.on_ready()

        def on_subscribed(response):
            self.south.read(["*"], on_read)

        def on_auth(response):
            if response.ok:
                self.south.subscribe(["*"], on_subscribed)

        for north, south, direction in self.map_overrides:
            self.map.add(north, south, direction)
        self.south.auth(key_id, secret, on_auth)

    # -- forwarding --------------------------------------------------------------

    def forward_read(self, session, north_seq: int, north_names: list[str]):
        south_names = [self.map.by_north[n].south for n in north_names]

        def on_response(response):
            if not response.ok:
                self.north._reply(session, north_seq, False, _body_lines(response))
                return
            rewritten = []
            for south_name, vtype, value in response.assignments:
                entry = self.map.by_south.get(south_name)
                if entry is not None:
                    rewritten.append((entry.north, vtype, value))
            from ..protocol.payload import serialize_assignments

            lines = [serialize_assignments(rewritten)] if rewritten else []
            self.north._reply(session, north_seq, True, lines)

        self.south.read(south_names, on_response)

    def forward_write(self, session, north_seq: int, south_assignments):
        def on_response(response):
            self.north._reply(session, north_seq, response.ok, _body_lines(response))

        self.south.write(south_assignments, on_response)

    def _on_south_publish(self, control: dict[str, str], assignments):
        north_changes = []
        for south_name, vtype, value in assignments:
            entry = self.map.by_south.get(south_name)
            if entry is None or entry.direction == NORTH_WRITE:
                continue
            north_changes.append((entry.north, vtype, value))
        if north_changes:
            self.north.publish_changes(
                north_changes,
                tick=int(control.get("tick", "0") or 0),
                ts_ms=int(control.get("ts", "0") or 0),
            )

    # -- metrics -------------------------------------------------------------------

    def render_metrics(self) -> str:
        lines = [f"{name} {self.counters[name]}" for name in sorted(self.counters)]
        lines.append(f"bridge_entries {len(self.map.by_north)}")
        lines.append(f"north_sessions {len(self.north.sessions)}")
        return "\n".join(lines) + "\n"


def _body_lines(response) -> list[str]:
    return [line for line in response.raw.split("\n") if line and not line.startswith("@")]
