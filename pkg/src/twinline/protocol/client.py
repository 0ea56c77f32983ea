"""Tag client: request/response correlation and subscription delivery.

Responses are matched to requests by the ``@req=<seq>`` echo line; PUBLISH
frames go to the subscription callback. Like the server, the client is
transport-agnostic and single-owner."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

from ..plc.tags import TagType
from .frame import Frame, FrameDecoder, MsgType, encode_frame
from .payload import parse_assignments, serialize_assignments, split_control


@dataclass
class Response:
    ok: bool
    control: dict[str, str]
    lines: dict[str, str]
    assignments: list[tuple[str, TagType, object]]
    raw: str

    @property
    def error_code(self) -> str:
        return self.lines.get("code", "")


class TagClient:
    def __init__(self, send_bytes: Callable[[bytes], None], name: str = "client"):
        self.send_bytes = send_bytes
        self.name = name
        self._seq = itertools.count(1)
        self.pending: dict[int, Callable[[Response], None]] = {}
        self.decoder = FrameDecoder()
        self.on_publish: Callable[[dict[str, str], list], None] | None = None
        self.dropped_responses = 0

    # -- sending ---------------------------------------------------------------

    def _request(self, mtype: MsgType, payload: str, callback) -> int:
        seq = next(self._seq)
        if callback:
            self.pending[seq] = callback
        self.send_bytes(encode_frame(Frame(mtype, seq, payload.encode("utf-8"))))
        return seq

    def auth(self, key_id: str, secret: str, callback=None) -> int:
        return self._request(MsgType.AUTH, f"{key_id}:{secret}", callback)

    def read(self, patterns: list[str], callback=None) -> int:
        return self._request(MsgType.READ, "\n".join(patterns), callback)

    def write(self, assignments: list[tuple[str, TagType, object]], callback=None) -> int:
        return self._request(MsgType.WRITE, serialize_assignments(assignments), callback)

    def write_raw(self, payload: str, callback=None) -> int:
        return self._request(MsgType.WRITE, payload, callback)

    def subscribe(self, filters: list[str], callback=None) -> int:
        return self._request(MsgType.SUBSCRIBE, "\n".join(filters), callback)

    # -- receiving ---------------------------------------------------------------

    def handle_bytes(self, data: bytes):
        for frame in self.decoder.feed(data):
            self.handle_frame(frame)

    def handle_frame(self, frame: Frame):
        text = frame.payload.decode("utf-8", errors="replace")
        control, body = split_control(text)
        if frame.msg_type == MsgType.PUBLISH:
            if self.on_publish:
                assignments = parse_assignments(body)
                self.on_publish(control, assignments)
            return
        if frame.msg_type not in (MsgType.ACK, MsgType.ERR):
            return
        req = int(control.get("req", "0") or 0)
        callback = self.pending.pop(req, None)
        if callback is None:
            self.dropped_responses += 1
            return
        lines: dict[str, str] = {}
        assignments = []
        for line in body.split("\n"):
            if not line:
                continue
            key, _, value = line.partition("=")
            lines[key] = value
        try:
            assignments = parse_assignments(body)
        except Exception:
            assignments = []
        callback(
            Response(
                ok=frame.msg_type == MsgType.ACK,
                control=control,
                lines=lines,
                assignments=assignments,
                raw=text,
            )
        )
