"""Binary frame packets and a resynchronising stream decoder.

Layout (little-endian)::

    magic        8  02 01 04 03 06 05 08 07
    version      u32
    total_len    u32   whole packet, magic and crc included
    radar_id     u32
    seq          u32
    timestamp_us u64
    num_points   u32
    points       num_points * 5 * f32   (x, y, z, energy, speed)
    crc          u32   CRC-32 of every byte after the magic, before the crc

An empty packet is therefore 40 bytes. Recordings (``.mmr``) are raw
concatenations of packets.
"""
from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from .errors import CapacityError

MAGIC = bytes([0x02, 0x01, 0x04, 0x03, 0x06, 0x05, 0x08, 0x07])
VERSION = 1
_HEADER = struct.Struct("<IIIIQI")
HEADER_LEN = len(MAGIC) + _HEADER.size  # 36
CRC_LEN = 4
EMPTY_PACKET_LEN = HEADER_LEN + CRC_LEN  # 40
POINT_BYTES = 5 * 4
MAX_POINTS = 65_535
MAX_PACKET_LEN = 1 << 20

_POINT_DTYPE = np.dtype("<f4")


@dataclass(eq=False)
class FramePacket:
    radar_id: int
    seq: int
    timestamp_us: int
    points: np.ndarray  # (N, 5) float32, radar-local
    crc: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float32)
        self.points = pts.reshape(-1, 5) if pts.size else np.zeros((0, 5), np.float32)

    def __eq__(self, other):
        if not isinstance(other, FramePacket):
            return NotImplemented
        return (self.radar_id == other.radar_id and self.seq == other.seq
                and self.timestamp_us == other.timestamp_us
                and self.points.shape == other.points.shape
                and self.points.tobytes() == other.points.tobytes())

    def __repr__(self):
        return (f"FramePacket(radar_id={self.radar_id}, seq={self.seq}, "
                f"timestamp_us={self.timestamp_us}, n_points={len(self.points)})")


class BadReason(str, enum.Enum):
    TRUNCATED = "truncated"
    BAD_MAGIC = "bad_magic"
    BAD_CRC = "bad_crc"
    BAD_LENGTH = "bad_length"


@dataclass(frozen=True)
class BadPacket:
    reason: BadReason
    bytes_consumed: int
    offset: int = 0


@dataclass(frozen=True)
class GoodPacket:
    packet: FramePacket
    bytes_consumed: int
    offset: int = 0


DecodeOutcome = Union[GoodPacket, BadPacket]


def packet_length(n_points: int) -> int:
    return EMPTY_PACKET_LEN + POINT_BYTES * n_points


def encode(packet: FramePacket) -> bytes:
    n = len(packet.points)
    if n > MAX_POINTS:
        raise CapacityError(f"{n} points exceeds the {MAX_POINTS} point limit")
    total = packet_length(n)
    body = _HEADER.pack(VERSION, total, packet.radar_id, packet.seq, packet.timestamp_us, n)
    body += np.ascontiguousarray(packet.points, dtype=_POINT_DTYPE).tobytes()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    packet.crc = crc
    return MAGIC + body + struct.pack("<I", crc)


class PacketDecoder:
    """Incremental decoder for one radar stream.

    ``feed`` returns every outcome that can be decided from the bytes seen so
    far; ``flush`` settles whatever is left at end of stream. Across a whole
    stream the ``bytes_consumed`` of all outcomes add up to the input length.
    """

    def __init__(self):
        self._buf = bytearray()
        self._offset = 0  # stream position of _buf[0]
        self.good = 0
        self.bad = 0

    def feed(self, data: bytes) -> List[DecodeOutcome]:
        self._buf += data
        return self._scan(final=False)

    def flush(self) -> List[DecodeOutcome]:
        out = self._scan(final=True)
        if self._buf:
            out.append(self._bad(BadReason.TRUNCATED if self._buf.startswith(MAGIC) else BadReason.BAD_MAGIC,
                                 len(self._buf)))
        return out

    def _bad(self, reason, n):
        outcome = BadPacket(reason, n, self._offset)
        self._consume(n)
        self.bad += 1
        return outcome

    def _consume(self, n):
        del self._buf[:n]
        self._offset += n

    def _next_magic(self, start):
        return self._buf.find(MAGIC, start)

    def _scan(self, final):
        out: List[DecodeOutcome] = []
        buf = self._buf
        while buf:
            at = buf.find(MAGIC)
            if at < 0:
                # hold back a tail that could be the start of a magic
                k = 0
                if not final:
                    for k in range(min(len(MAGIC) - 1, len(buf)), 0, -1):
                        if MAGIC.startswith(bytes(buf[-k:])):
                            break
                    else:
                        k = 0
                if len(buf) > k:
                    out.append(self._bad(BadReason.BAD_MAGIC, len(buf) - k))
                break
            if at > 0:
                out.append(self._bad(BadReason.BAD_MAGIC, at))
                continue
            # buf starts with MAGIC
            nxt = self._next_magic(1)
            if len(buf) < HEADER_LEN:
                if nxt > 0:
                    out.append(self._bad(BadReason.TRUNCATED, nxt))
                    continue
                break
            version, total, radar_id, seq, ts, n_pts = _HEADER.unpack_from(buf, len(MAGIC))
            if (version != VERSION or total > MAX_PACKET_LEN or n_pts > MAX_POINTS
                    or total != packet_length(n_pts)):
                if nxt > 0:
                    out.append(self._bad(BadReason.BAD_LENGTH, nxt))
                    continue
                if final or len(buf) >= MAX_PACKET_LEN:
                    out.append(self._bad(BadReason.BAD_LENGTH, len(buf)))
                    continue
                # the next magic decides how much to skip
                break
            if len(buf) < total:
                if nxt > 0:
                    out.append(self._bad(BadReason.TRUNCATED, nxt))
                    continue
                break
            (crc,) = struct.unpack_from("<I", buf, total - CRC_LEN)
            body = bytes(buf[len(MAGIC):total - CRC_LEN])
            if zlib.crc32(body) & 0xFFFFFFFF != crc:
                # a magic inside the declared span means this packet was cut short
                # and the next one started early
                reason = BadReason.TRUNCATED if 0 < nxt < total else BadReason.BAD_CRC
                out.append(self._bad(reason, nxt if nxt > 0 else total))
                continue
            pts = np.frombuffer(body, dtype=_POINT_DTYPE, count=n_pts * 5, offset=_HEADER.size)
            pkt = FramePacket(radar_id, seq, ts, pts.reshape(n_pts, 5), crc)
            out.append(GoodPacket(pkt, total, self._offset))
            self._consume(total)
            self.good += 1
        return out


def decode_stream(data: bytes) -> List[DecodeOutcome]:
    dec = PacketDecoder()
    out = dec.feed(bytes(data))
    out.extend(dec.flush())
    return out


def packets(outcomes) -> List[FramePacket]:
    return [o.packet for o in outcomes if isinstance(o, GoodPacket)]


def write_recording(path, pkts) -> None:
    with open(path, "wb") as fh:
        for p in pkts:
            fh.write(encode(p) if isinstance(p, FramePacket) else p)


def read_recording(path) -> List[DecodeOutcome]:
    with open(path, "rb") as fh:
        return decode_stream(fh.read())
