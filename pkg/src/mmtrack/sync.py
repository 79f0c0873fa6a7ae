"""Time-window merging of several radar streams and frame-group assembly.

Windows are ``[k*w, (k+1)*w)`` on the producer clock. A window closes as soon
as any radar delivers a packet stamped at or after its end, so buffered
backlog per radar never exceeds what fits in one open window. Packets that
arrive behind the watermark are dropped and counted; they are never merged
into an already-emitted window.
"""
from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np

from .codec import FramePacket
from .errors import EmptyError, StaleError
from .geometry import RigidTransform, apply_transform


@dataclass(frozen=True)
class MergedWindow:
    index: int
    start_us: int
    end_us: int
    packets: tuple  # FramePackets, ordered by (radar_id, timestamp)

    @property
    def sources(self):
        return frozenset(p.radar_id for p in self.packets)

    @property
    def span_us(self):
        if not self.packets:
            return 0
        ts = [p.timestamp_us for p in self.packets]
        return max(ts) - min(ts)


@dataclass
class SyncStats:
    windows: int = 0
    packets: int = 0
    late: int = 0
    overflow: int = 0
    empty_windows: int = 0
    max_depth: Dict[int, int] = field(default_factory=dict)

    def record(self):
        return {"windows": self.windows, "packets": self.packets, "late": self.late,
                "overflow": self.overflow, "empty_windows": self.empty_windows,
                **{f"max_depth_r{k}": v for k, v in sorted(self.max_depth.items())}}


class Synchronizer:
    """Per-radar FIFOs feeding contiguous fixed-length windows.

    ``ingest`` is timestamp-driven and deterministic. ``ingest_strict``
    raises StaleError instead of silently counting late packets.
    """

    def __init__(self, radar_ids: Iterable[int], window_s=0.05, fifo_capacity=8):
        self.window_us = int(round(window_s * 1e6))
        self.capacity = fifo_capacity
        self.fifos: Dict[int, deque] = {r: deque() for r in radar_ids}
        self.stats = SyncStats(max_depth={r: 0 for r in self.fifos})
        self.next_index: Optional[int] = None  # first window not yet emitted
        self.watermark_us: Optional[int] = None

    def window_of(self, ts_us: int) -> int:
        return ts_us // self.window_us

    def ingest(self, packet: FramePacket) -> List[MergedWindow]:
        try:
            return self.ingest_strict(packet)
        except StaleError:
            return []

    def ingest_strict(self, packet: FramePacket) -> List[MergedWindow]:
        rid = packet.radar_id
        if rid not in self.fifos:
            self.fifos[rid] = deque()
            self.stats.max_depth[rid] = 0
        k = self.window_of(packet.timestamp_us)
        if self.next_index is not None and k < self.next_index:
            self.stats.late += 1
            raise StaleError(f"radar {rid} packet at {packet.timestamp_us} us is behind the watermark")
        if self.next_index is None:
            self.next_index = k
        out = self._close_before(k)
        fifo = self.fifos[rid]
        if len(fifo) >= self.capacity:
            fifo.popleft()
            self.stats.overflow += 1
        fifo.append(packet)
        self.stats.packets += 1
        if len(fifo) > self.stats.max_depth[rid]:
            self.stats.max_depth[rid] = len(fifo)
        return out

    def poll(self, now_us: int, grace_windows=2.0) -> List[MergedWindow]:
        """Close windows whose end is more than ``grace_windows`` behind ``now_us``."""
        if self.next_index is None:
            return []
        limit = (now_us - int(grace_windows * self.window_us)) // self.window_us
        return self._close_before(limit)

    def flush(self) -> List[MergedWindow]:
        """Close every window that still holds packets."""
        if self.next_index is None:
            return []
        last = max((self.window_of(p.timestamp_us) for f in self.fifos.values() for p in f),
                   default=self.next_index - 1)
        return self._close_before(last + 1)

    def _close_before(self, k: int) -> List[MergedWindow]:
        out = []
        while self.next_index is not None and self.next_index < k:
            idx = self.next_index
            end = (idx + 1) * self.window_us
            members = []
            for rid in sorted(self.fifos):
                fifo = self.fifos[rid]
                while fifo and fifo[0].timestamp_us < end:
                    members.append(fifo.popleft())
            win = MergedWindow(idx, idx * self.window_us, end, tuple(members))
            self.stats.windows += 1
            if not members:
                self.stats.empty_windows += 1
            out.append(win)
            self.next_index = idx + 1
            self.watermark_us = end
        return out

    def depth(self, radar_id) -> int:
        return len(self.fifos[radar_id])


@dataclass(frozen=True)
class FrameGroup:
    tick: int
    timestamp_us: int
    points: np.ndarray  # (N, 5) room frame
    n_windows: int
    sources: tuple  # per constituent window, frozenset of radar ids


class FrameGrouper:
    """Sliding concatenation of the most recent ``length`` windows (stride 1)."""

    def __init__(self, transforms: Dict[int, RigidTransform], length=10):
        self.transforms = transforms
        self.length = length
        self._windows: deque = deque(maxlen=length)

    def transform_window(self, window: MergedWindow) -> np.ndarray:
        parts = []
        for p in window.packets:
            if len(p.points):
                parts.append(apply_transform(self.transforms[p.radar_id], p.points.astype(float)))
        return np.concatenate(parts) if parts else np.zeros((0, 5))

    def push(self, window: MergedWindow) -> FrameGroup:
        self._windows.append((window, self.transform_window(window)))
        return self.group()

    def group(self) -> FrameGroup:
        if not self._windows:
            raise EmptyError("no windows yet")
        last = self._windows[-1][0]
        pts = [p for _, p in self._windows]
        return FrameGroup(last.index, last.start_us, np.concatenate(pts), len(self._windows),
                          tuple(w.sources for w, _ in self._windows))


def assemble_group(recent_windows, transforms, length=None) -> FrameGroup:
    recent = list(recent_windows)
    if not recent:
        raise EmptyError("no windows yet")
    g = FrameGrouper(transforms, length or len(recent))
    for w in recent[-g.length:]:
        g.push(w)
    return g.group()


class PacketFeed:
    """Bounded per-radar FIFOs between producer threads and one consumer.

    Producers call ``put``/``close``; the consumer calls ``get``, which hands
    out packets in producer-timestamp order. It waits until every open stream
    has a head packet (or ``grace_s`` of wall time passes), so a fast replay
    yields exactly the sorted merge of all streams. With ``block=False``
    producers never wait: a full FIFO drops its oldest packet.
    """

    def __init__(self, radar_ids, capacity=64, block=True, grace_s: Optional[float] = None):
        self._q = {r: deque() for r in radar_ids}
        self._open = set(radar_ids)
        self.capacity = capacity
        self.block = block
        self.grace_s = grace_s
        self.dropped = 0
        self.bad_packets = 0
        self._cv = threading.Condition()

    def put(self, radar_id, packet: FramePacket):
        with self._cv:
            q = self._q[radar_id]
            if self.block:
                while len(q) >= self.capacity:
                    self._cv.wait()
            elif len(q) >= self.capacity:
                q.popleft()
                self.dropped += 1
            q.append(packet)
            self._cv.notify_all()

    def bad(self, radar_id, outcome=None):
        with self._cv:
            self.bad_packets += 1

    def close(self, radar_id):
        with self._cv:
            self._open.discard(radar_id)
            self._cv.notify_all()

    def _ready(self):
        return all(self._q[r] for r in self._open)

    def get(self) -> Optional[FramePacket]:
        with self._cv:
            deadline = None
            while not self._ready():
                if self.grace_s is not None:
                    now = time.monotonic()
                    if deadline is None:
                        deadline = now + self.grace_s
                    if now >= deadline and any(self._q.values()):
                        break
                    self._cv.wait(timeout=max(deadline - now, 1e-3))
                else:
                    self._cv.wait()
            heads = [(q[0].timestamp_us, r) for r, q in self._q.items() if q]
            if not heads:
                return None
            _, r = min(heads)
            pkt = self._q[r].popleft()
            self._cv.notify_all()
            return pkt

    def __iter__(self):
        while True:
            p = self.get()
            if p is None:
                return
            yield p
