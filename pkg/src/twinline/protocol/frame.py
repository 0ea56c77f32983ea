"""Binary frame codec.

Layout, all integers big-endian (see protocol.md for worked examples):

    magic   4 bytes  ASCII "TW01"
    type    1 byte   0x01 READ .. 0x07 AUTH
    seq     4 bytes  unsigned
    len     4 bytes  payload length, <= 65536
    payload len bytes
    crc     4 bytes  CRC-32 (IEEE) over everything before it

Decoding is prefix-safe: a truncated buffer reports how many bytes are still
missing instead of failing, and corrupt input never consumes beyond the
declared frame length.
"""

from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass, field

MAGIC = b"TW01"
HEADER = struct.Struct(">4sBII")
HEADER_LEN = HEADER.size  # 13
CRC_LEN = 4
MAX_PAYLOAD = 65536


class MsgType(enum.IntEnum):
    READ = 0x01
    WRITE = 0x02
    SUBSCRIBE = 0x03
    PUBLISH = 0x04
    ACK = 0x05
    ERR = 0x06
    AUTH = 0x07


class CodecError(ValueError):
    """Base for decode failures; ``skip`` is how many bytes to discard."""

    skip = 1


class BadMagic(CodecError):
    pass


class BadCrc(CodecError):
    def __init__(self, skip: int):
        super().__init__("crc mismatch")
        self.skip = skip


class Oversize(BadMagic):
    """Declared payload length is impossible, so this is not a frame start;
    classified with BadMagic for corruption handling."""

    def __init__(self, skip: int = HEADER_LEN):
        super().__init__("payload_len exceeds 65536")
        self.skip = skip


class Truncated(Exception):
    """Not an error: need ``missing`` more bytes before a verdict."""

    def __init__(self, missing: int):
        super().__init__(f"need {missing} more bytes")
        self.missing = missing


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    seq: int
    payload: bytes = b""


def encode_frame(frame: Frame) -> bytes:
    if len(frame.payload) > MAX_PAYLOAD:
        raise ValueError("payload exceeds 65536 bytes")
    head = HEADER.pack(MAGIC, int(frame.msg_type), frame.seq, len(frame.payload))
    body = head + frame.payload
    return body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


def decode_frame(buf: bytes | memoryview) -> tuple[Frame, int]:
    """Decode one frame from the head of ``buf``; returns (frame, consumed).

    Raises Truncated when more bytes are needed, BadMagic / Oversize / BadCrc
    on rejected input (``skip`` tells the stream layer how far to advance).
    """
    buf = bytes(buf)
    if len(buf) < HEADER_LEN:
        if buf and not MAGIC.startswith(buf[:4]):
            raise BadMagic("bad magic")
        raise Truncated(HEADER_LEN - len(buf))
    magic, mtype, seq, plen = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagic("bad magic")
    if plen > MAX_PAYLOAD:
        raise Oversize()
    total = HEADER_LEN + plen + CRC_LEN
    if len(buf) < total:
        raise Truncated(total - len(buf))
    body = buf[: HEADER_LEN + plen]
    (crc,) = struct.unpack_from(">I", buf, HEADER_LEN + plen)
    if crc != zlib.crc32(body) & 0xFFFFFFFF:
        raise BadCrc(skip=total)
    try:
        msg_type = MsgType(mtype)
    except ValueError:
        raise BadMagic(f"unknown message type 0x{mtype:02x}") from None
    return Frame(msg_type, seq, bytes(buf[HEADER_LEN:HEADER_LEN + plen])), total


def decode_frame_strict(buf: bytes) -> tuple[Frame, int]:
    """Decode when ``buf`` is known to be the complete message (datagram or
    end-of-stream): a frame whose declared length runs past the data cannot
    verify, so Truncated becomes BadCrc here instead of a wait-for-more.
    """
    try:
        return decode_frame(buf)
    except Truncated:
        raise BadCrc(skip=len(buf)) from None


@dataclass
class FrameDecoder:
    """Incremental stream decoder; feed bytes, iterate complete frames.

    Rejected spans are skipped (resynchronizing on the next plausible magic)
    and counted, never raised, so a corrupt peer cannot crash the session.
    """

    buffer: bytearray = field(default_factory=bytearray)
    rejected: int = 0

    def feed(self, data: bytes) -> list[Frame]:
        self.buffer.extend(data)
        frames = []
        while self.buffer:
            try:
                frame, used = decode_frame(self.buffer)
            except Truncated:
                break
            except CodecError as err:
                self.rejected += 1
                del self.buffer[: max(1, err.skip)]
                continue
            frames.append(frame)
            del self.buffer[:used]
        return frames
