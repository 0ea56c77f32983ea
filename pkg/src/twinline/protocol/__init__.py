from .frame import (
    BadCrc,
    BadMagic,
    Frame,
    FrameDecoder,
    MsgType,
    Oversize,
    Truncated,
    decode_frame,
    encode_frame,
)
from .payload import PayloadError, parse_assignments, serialize_assignments
from .server import ServerSession, TagServer

__all__ = [
    "Frame",
    "MsgType",
    "encode_frame",
    "decode_frame",
    "FrameDecoder",
    "BadMagic",
    "BadCrc",
    "Oversize",
    "Truncated",
    "parse_assignments",
    "serialize_assignments",
    "PayloadError",
    "TagServer",
    "ServerSession",
]
