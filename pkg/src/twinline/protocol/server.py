"""Tag server: sessions, request handling, pub/sub fan-out.

The server is transport-agnostic; a session is just a sink for encoded frames
plus a queue-depth probe. One owner (the stack's event loop or the socket
layer's lock) serializes all calls, so tag mutation and subscription matching
happen in a single place.

The backend object supplies the actual tag semantics:

    match(pattern) -> list[str]
    read(names) -> list[(name, TagType, value)]
    write(assignments, session) -> (applied, extra_lines, error_code | None)
    write_scope(name) -> required scope for writing that name
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

from .frame import Frame, FrameDecoder, MsgType, encode_frame
from .payload import PayloadError, parse_assignments, serialize_assignments

SCOPE_READ = "ReadTags"
SCOPE_WRITE = "WriteTags"
SCOPE_SUBSCRIBE = "Subscribe"
SCOPE_MISSION = "SubmitMission"
ALL_SCOPES = frozenset({SCOPE_READ, SCOPE_WRITE, SCOPE_SUBSCRIBE, SCOPE_MISSION})

MAX_AUTH_FAILURES = 3


@dataclass
class ServerSession:
    session_id: int
    send_bytes: Callable[[bytes], None]
    remote: bool = True
    authenticated: bool = False
    scopes: frozenset[str] = frozenset()
    key_id: str = ""
    subscriptions: list[str] = field(default_factory=list)
    auth_failures: int = 0
    closed: bool = False
    decoder: FrameDecoder = field(default_factory=FrameDecoder)
    queue_depth: Callable[[], int] = lambda: 0
    frames_in: int = 0
    frames_out: int = 0


class TagServer:
    def __init__(
        self,
        backend,
        authenticator: Callable[[str, ServerSession], tuple[bool, frozenset[str] | str]],
        max_queue: int = 1024,
        on_disconnect: Callable[[ServerSession], None] | None = None,
    ):
        self.backend = backend
        self.authenticator = authenticator
        self.max_queue = max_queue
        self.on_disconnect = on_disconnect
        self.sessions: dict[int, ServerSession] = {}
        self._ids = itertools.count(1)
        self._seq = itertools.count(1)
        self.published_frames = 0

    # -- session lifecycle ---------------------------------------------------

    def connect(self, send_bytes, remote: bool = True) -> ServerSession:
        session = ServerSession(next(self._ids), send_bytes, remote=remote)
        self.sessions[session.session_id] = session
        return session

    def disconnect(self, session: ServerSession):
        session.closed = True
        self.sessions.pop(session.session_id, None)
        if self.on_disconnect:
            self.on_disconnect(session)

    # -- frame plumbing --------------------------------------------------------

    def handle_bytes(self, session: ServerSession, data: bytes):
        for frame in session.decoder.feed(data):
            if session.closed:
                break
            session.frames_in += 1
            self.handle_frame(session, frame)

    def _send(self, session: ServerSession, frame: Frame):
        if session.closed:
            return
        session.frames_out += 1
        session.send_bytes(encode_frame(frame))

    def _reply(self, session: ServerSession, req_seq: int, ok: bool, lines: list[str]):
        payload = "\n".join([f"@req={req_seq}"] + lines).encode("utf-8")
        self._send(
            session,
            Frame(MsgType.ACK if ok else MsgType.ERR, next(self._seq), payload),
        )

    def _error(self, session: ServerSession, req_seq: int, code: str):
        self._reply(session, req_seq, False, [f"code={code}"])

    # -- request dispatch ------------------------------------------------------

    def handle_frame(self, session: ServerSession, frame: Frame):
        if frame.msg_type == MsgType.AUTH:
            self._handle_auth(session, frame)
            return
        if not session.authenticated:
            self._error(session, frame.seq, "Unauthenticated")
            return
        try:
            text = frame.payload.decode("utf-8")
        except UnicodeDecodeError:
            self._error(session, frame.seq, "BadPayload")
            return
        if frame.msg_type == MsgType.READ:
            self._handle_read(session, frame.seq, text)
        elif frame.msg_type == MsgType.WRITE:
            self._handle_write(session, frame.seq, text)
        elif frame.msg_type == MsgType.SUBSCRIBE:
            self._handle_subscribe(session, frame.seq, text)
        else:
            self._error(session, frame.seq, "BadPayload")

    def _handle_auth(self, session: ServerSession, frame: Frame):
        try:
            text = frame.payload.decode("utf-8")
        except UnicodeDecodeError:
            text = ""
        ok, result = self.authenticator(text, session)
        if ok:
            session.authenticated = True
            session.scopes = frozenset(result)
            session.key_id = text.split(":", 1)[0]
            self._reply(
                session, frame.seq, True, ["scopes=" + ",".join(sorted(session.scopes))]
            )
            return
        session.auth_failures += 1
        self._error(session, frame.seq, str(result))
        if session.auth_failures >= MAX_AUTH_FAILURES:
            self.disconnect(session)

    def _handle_read(self, session: ServerSession, seq: int, text: str):
        if SCOPE_READ not in session.scopes:
            self._error(session, seq, "Unauthorized")
            return
        patterns = [line for line in text.split("\n") if line]
        if not patterns:
            patterns = ["*"]
        names: list[str] = []
        seen = set()
        for pattern in patterns:
            matched = self.backend.match(pattern)
            if not matched and not pattern.endswith("*"):
                self._error(session, seq, "UnknownTag")
                return
            for n in matched:
                if n not in seen:
                    seen.add(n)
                    names.append(n)
        assignments = self.backend.read(sorted(names))
        self._reply(session, seq, True, [serialize_assignments(assignments)] if assignments else [])

    def _handle_write(self, session: ServerSession, seq: int, text: str):
        try:
            assignments = parse_assignments(text)
        except PayloadError:
            self._error(session, seq, "BadPayload")
            return
        if not assignments:
            self._error(session, seq, "BadPayload")
            return
        for name, _, _ in assignments:
            needed = self.backend.write_scope(name)
            if needed not in session.scopes:
                self._error(session, seq, "Unauthorized")
                return
        applied, extra, error = self.backend.write(assignments, session)
        if error:
            self._error(session, seq, error)
            return
        self._reply(session, seq, True, [f"applied={applied}"] + extra)

    def _handle_subscribe(self, session: ServerSession, seq: int, text: str):
        if SCOPE_SUBSCRIBE not in session.scopes:
            self._error(session, seq, "Unauthorized")
            return
        filters = [line for line in text.split("\n") if line]
        if not filters:
            self._error(session, seq, "BadPayload")
            return
        session.subscriptions.extend(filters)
        self._reply(session, seq, True, [f"filters={len(session.subscriptions)}"])

    # -- publishing ------------------------------------------------------------

    @staticmethod
    def _matches(filters: list[str], name: str) -> bool:
        for f in filters:
            if f.endswith("*"):
                if name.startswith(f[:-1]):
                    return True
            elif f == name:
                return True
        return False

    def publish_changes(self, changed, tick: int, ts_ms: int):
        """Fan one tick's batch of (name, TagType, value) out to subscribers,
        ordered by tag name; per-tag order across ticks follows tick order."""
        if not changed:
            return
        changed = sorted(changed, key=lambda c: c[0])
        for session in list(self.sessions.values()):
            if not session.subscriptions or session.closed:
                continue
            subset = [c for c in changed if self._matches(session.subscriptions, c[0])]
            if not subset:
                continue
            if session.queue_depth() > self.max_queue:
                self._send(
                    session,
                    Frame(
                        MsgType.ERR,
                        next(self._seq),
                        b"@req=0\ncode=Overflow",
                    ),
                )
                self.disconnect(session)
                continue
            payload = "\n".join(
                [f"@tick={tick}", f"@ts={ts_ms}", serialize_assignments(subset)]
            ).encode("utf-8")
            self._send(session, Frame(MsgType.PUBLISH, next(self._seq), payload))
            self.published_frames += 1
