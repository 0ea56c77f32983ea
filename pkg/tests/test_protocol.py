"""Wire protocol: codec round-trips, corruption handling, payload grammar."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st_

from twinline.plc.tags import TagType
from twinline.protocol import (
    BadCrc,
    BadMagic,
    Frame,
    FrameDecoder,
    MsgType,
    Oversize,
    PayloadError,
    Truncated,
    decode_frame,
    encode_frame,
)
from twinline.protocol.payload import (
    parse_assignments,
    parse_value,
    serialize_assignments,
    serialize_value,
    split_control,
)


def crc32_reference(data: bytes) -> int:
    """Bitwise CRC-32 (IEEE), independent of zlib."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (0xEDB88320 if crc & 1 else 0)
    return crc ^ 0xFFFFFFFF


class TestFrameCodec:
    def test_empty_ack_is_exactly_17_bytes(self):
        wire = encode_frame(Frame(MsgType.ACK, 1, b""))
        assert len(wire) == 17
        head = bytes.fromhex("54573031" "05" "00000001" "00000000")
        assert wire[:13] == head
        assert wire[13:] == crc32_reference(head).to_bytes(4, "big")
        assert wire.hex() == "545730310500000001000000005608 6603".replace(" ", "")

    def test_round_trip_random_frames(self):
        rng = random.Random(0xC0FFEE)
        for _ in range(2000):
            frame = Frame(
                MsgType(rng.randint(1, 7)),
                rng.getrandbits(32),
                rng.randbytes(rng.randint(0, 200)),
            )
            decoded, used = decode_frame(encode_frame(frame))
            assert decoded == frame
            assert used == 17 + len(frame.payload)

    def test_single_byte_corruption_detected(self):
        wire = bytearray(encode_frame(Frame(MsgType.WRITE, 7, b"ST1.STOP=B:0")))
        for i in range(len(wire)):
            for flip in (0x01, 0x80):
                corrupt = bytearray(wire)
                corrupt[i] ^= flip
                with pytest.raises((BadMagic, BadCrc, Oversize, Truncated)):
                    decode_frame(bytes(corrupt))

    def test_truncation_is_prefix_safe(self):
        wire = encode_frame(Frame(MsgType.READ, 3, b"ST1.*"))
        for cut in range(len(wire)):
            try:
                decode_frame(wire[:cut])
            except Truncated as t:
                assert t.missing == len(wire) - cut or cut < 13
            except BadMagic:
                pytest.fail("valid prefix flagged as bad magic")

    def test_oversize_rejected(self):
        head = b"TW01" + bytes([1]) + (0).to_bytes(4, "big") + (65537).to_bytes(4, "big")
        with pytest.raises(Oversize):
            decode_frame(head + b"x" * 20)

    def test_decoder_resynchronizes_after_garbage(self):
        good = encode_frame(Frame(MsgType.ACK, 9, b"@req=1"))
        dec = FrameDecoder()
        frames = dec.feed(b"\xde\xad\xbe\xef" + good + b"TR" + good)
        assert [f.seq for f in frames] == [9, 9]
        assert dec.rejected >= 1

    def test_decode_never_crashes_on_garbage(self):
        rng = random.Random(1234)
        dec = FrameDecoder()
        for _ in range(2000):
            dec.feed(rng.randbytes(rng.randint(0, 64)))

    @settings(max_examples=60, deadline=None)
    @given(st_.data())
    def test_stream_reassembly_across_arbitrary_chunking(self, data):
        rng = random.Random(data.draw(st_.integers(0, 2**32)))
        frames = [
            Frame(
                MsgType(rng.randint(1, 7)),
                rng.getrandbits(32),
                rng.randbytes(rng.randint(0, 40)),
            )
            for _ in range(rng.randint(1, 12))
        ]
        wire = b"".join(encode_frame(f) for f in frames)
        dec = FrameDecoder()
        received = []
        i = 0
        while i < len(wire):
            n = data.draw(st_.integers(1, 24))
            received.extend(dec.feed(wire[i:i + n]))
            i += n
        assert received == frames
        assert dec.rejected == 0


class TestPayload:
    def test_round_trip_assignments(self):
        items = [
            ("ST1.STOP", TagType.BOOL, False),
            ("ST1.RFID", TagType.STRING, "P-001 with spaces/%="),
            ("SYS.MAT_1", TagType.INT32, -42),
            ("SYS.ENERGY_CONV0", TagType.FLOAT64, 123456.75),
        ]
        assert parse_assignments(serialize_assignments(items)) == items

    def test_duplicate_names_rejected(self):
        text = "A=B:1\nA=B:0"
        with pytest.raises(PayloadError):
            parse_assignments(text)

    @pytest.mark.parametrize(
        "bad", ["X=B:2", "X=I:1.5", "X=F:1", "X=Q:9", "X=", "noequals", "=B:1", "X=F:nan"]
    )
    def test_bad_values_rejected(self, bad):
        with pytest.raises(PayloadError):
            parse_assignments(bad)

    @settings(max_examples=200)
    @given(st_.floats(allow_nan=False, allow_infinity=False))
    def test_float_round_trip(self, x):
        vtype, value = parse_value(serialize_value(TagType.FLOAT64, x).split("=")[-1])
        assert value == x

    @settings(max_examples=200)
    @given(st_.text(max_size=80))
    def test_string_round_trip(self, s):
        vtype, value = parse_value(serialize_value(TagType.STRING, s))
        assert value == s

    def test_split_control(self):
        control, body = split_control("@req=5\n@tick=10\nST1.STOP=B:1")
        assert control == {"req": "5", "tick": "10"}
        assert body == "ST1.STOP=B:1"
