import struct
import zlib

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from mmtrack.codec import (
    EMPTY_PACKET_LEN,
    MAGIC,
    MAX_POINTS,
    BadPacket,
    BadReason,
    FramePacket,
    GoodPacket,
    PacketDecoder,
    decode_stream,
    encode,
    packets,
    read_recording,
    write_recording,
)
from mmtrack.errors import CapacityError

GOLDEN_EMPTY = bytes.fromhex(
    "0201040306050807"  # magic
    "01000000"  # version
    "28000000"  # total length 40
    "03000000"  # radar id
    "07000000"  # seq
    "40e2010000000000"  # timestamp 123456 us
    "00000000"  # no points
)


def _rand_packet(rng, n=None):
    n = int(rng.integers(0, 40)) if n is None else n
    return FramePacket(int(rng.integers(0, 8)), int(rng.integers(0, 2**32)), int(rng.integers(0, 2**63)),
                       rng.normal(0, 100, (n, 5)).astype(np.float32))


def test_empty_packet_golden():
    raw = encode(FramePacket(3, 7, 123456, np.zeros((0, 5))))
    assert EMPTY_PACKET_LEN == 40 and len(raw) == 40
    assert raw[:-4] == GOLDEN_EMPTY
    assert raw[-4:] == struct.pack("<I", zlib.crc32(GOLDEN_EMPTY[8:]))


def test_one_point_payload():
    raw = encode(FramePacket(1, 0, 0, np.array([[1.0, 2.0, 0.5, 250.0, -0.3]])))
    assert len(raw) == 60
    assert raw[36:56] == struct.pack("<5f", 1.0, 2.0, 0.5, 250.0, -0.3)


def test_round_trip(rng):
    for _ in range(200):
        p = _rand_packet(rng)
        out = decode_stream(encode(p))
        assert len(out) == 1 and isinstance(out[0], GoodPacket)
        assert out[0].packet == p and out[0].bytes_consumed == len(encode(p))


def test_capacity():
    with pytest.raises(CapacityError):
        encode(FramePacket(1, 0, 0, np.zeros((MAX_POINTS + 1, 5), np.float32)))


def test_truncated():
    raw = encode(FramePacket(1, 0, 0, np.ones((4, 5))))[:-3]
    out = decode_stream(raw)
    assert [type(o) for o in out] == [BadPacket] and out[0].reason == BadReason.TRUNCATED
    assert out[0].bytes_consumed == len(raw)


def test_bit_flip_is_bad_crc():
    raw = bytearray(encode(FramePacket(1, 0, 0, np.ones((4, 5)))))
    raw[40] ^= 0x10
    out = decode_stream(bytes(raw))
    assert len(out) == 1 and out[0].reason == BadReason.BAD_CRC


def test_bad_length_field():
    raw = bytearray(encode(FramePacket(1, 0, 0, np.ones((2, 5)))))
    raw[12:16] = struct.pack("<I", 1 << 21)
    good = encode(FramePacket(2, 1, 5, np.ones((1, 5))))
    out = decode_stream(bytes(raw) + good)
    assert out[0].reason == BadReason.BAD_LENGTH
    assert isinstance(out[-1], GoodPacket) and out[-1].packet.radar_id == 2


def test_truncated_then_valid():
    a = encode(FramePacket(1, 0, 0, np.ones((6, 5))))
    b = encode(FramePacket(1, 1, 50_000, np.ones((3, 5))))
    out = decode_stream(a[:50] + b)
    assert [o.reason for o in out if isinstance(o, BadPacket)] == [BadReason.TRUNCATED]
    assert packets(out)[0].seq == 1
    assert sum(o.bytes_consumed for o in out) == 50 + len(b)


@settings(max_examples=300, suppress_health_check=[HealthCheck.too_slow])
@given(st.binary(max_size=400), st.binary(max_size=400))
def test_resync_after_garbage(junk, tail):
    good = encode(FramePacket(4, 9, 77, np.arange(10, dtype=np.float32).reshape(2, 5)))
    out = decode_stream(junk + good)
    got = packets(out)
    assert got and got[-1].seq == 9 and got[-1].radar_id == 4
    assert sum(o.bytes_consumed for o in out) == len(junk) + len(good)


@settings(max_examples=500)
@given(st.binary(max_size=2000))
def test_fuzz_progress(data):
    out = decode_stream(data)
    assert all(o.bytes_consumed > 0 for o in out)
    assert sum(o.bytes_consumed for o in out) == len(data)


@settings(max_examples=100)
@given(st.binary(max_size=600), st.lists(st.integers(1, 97), max_size=10))
def test_chunked_feed_equals_whole(data, cuts):
    blob = data + encode(FramePacket(1, 2, 3, np.ones((2, 5)))) + data[:17]
    dec = PacketDecoder()
    out, pos = [], 0
    for c in cuts:
        out += dec.feed(blob[pos:pos + c])
        pos += c
    out += dec.feed(blob[pos:]) + dec.flush()
    whole = decode_stream(blob)

    def summary(outs):
        # garbage may be reported in different slices; good packets and the bad bytes may not differ
        good = [(o.offset, o.bytes_consumed, o.packet.seq) for o in outs if isinstance(o, GoodPacket)]
        bad = {i for o in outs if isinstance(o, BadPacket) for i in range(o.offset, o.offset + o.bytes_consumed)}
        return good, bad
    assert summary(out) == summary(whole)


def test_magic_inside_payload(rng):
    pts = np.frombuffer(MAGIC * 5, dtype=np.float32).reshape(2, 5)
    p = FramePacket(1, 0, 0, pts)
    assert packets(decode_stream(encode(p))) == [p]


def test_recording_file(tmp_path, rng):
    pk = [_rand_packet(rng) for _ in range(5)]
    path = tmp_path / "radar1.mmr"
    write_recording(path, pk)
    assert packets(read_recording(path)) == pk
