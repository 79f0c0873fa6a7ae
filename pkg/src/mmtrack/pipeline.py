"""Per-tick orchestration of the processing chain, plus output writers."""
from __future__ import annotations

import csv
import enum
import heapq
import json
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np

from .clustering import dynamic_dbscan
from .codec import FramePacket, GoodPacket, PacketDecoder
from .config import PipelineConfig, StatusLabel
from .filtering import BackgroundGrid, BesThresholds, bes_filter
from .geometry import build_transform
from .status import (FallEvent, Notifier, PostureAccumulator, StatusTracker, emit_fall)
from .sync import FrameGrouper, MergedWindow, Synchronizer
from .tracking import TrackState, Tracker

STAGES = ("transform", "filter", "cluster", "track", "status")


class PipelineMode(str, enum.Enum):
    WORKING = "working"
    STANDBY = "standby"


@dataclass
class TrackRow:
    tick: int
    timestamp_us: int
    track_id: int
    x: float
    y: float
    z: float
    state: str
    status: str
    box: tuple  # ground box


@dataclass
class TickResult:
    tick: int
    timestamp_us: int
    mode: PipelineMode
    processed: bool
    rows: List[TrackRow] = field(default_factory=list)
    events: List[FallEvent] = field(default_factory=list)
    postures: list = field(default_factory=list)  # (track_id, PostureReport)
    n_points: int = 0
    n_clusters: int = 0


class Pipeline:
    """Consumes packets (any radar, producer-timestamp order) and runs one tick per window."""

    def __init__(self, config: PipelineConfig = PipelineConfig(), notifier: Optional[Notifier] = None):
        self.cfg = config
        self.transforms = {r.radar_id: build_transform(r) for r in config.radars}
        self.sync = Synchronizer(config.radar_ids, config.sync.window_s, config.sync.fifo_capacity)
        self.grouper = FrameGrouper(self.transforms, config.sync.group_length)
        self.thresholds = BesThresholds.from_config(config)
        self.grid = BackgroundGrid.from_params(config.background, config.fps.working)
        self.tracker = Tracker(config.tracking)
        self.notifier = notifier
        self.status: Dict[int, StatusTracker] = {}
        self.reported: Dict[int, Optional[StatusLabel]] = {}
        self.posture: Dict[int, PostureAccumulator] = {}
        self.mode = PipelineMode.WORKING
        self.mode_changes: List[tuple] = []  # (tick, mode)
        self.last_detection_us: Optional[int] = None
        self.stride = max(1, int(round(config.fps.working / config.fps.standby)))
        self.timings: Dict[str, List[float]] = defaultdict(list)
        self.bad_packets = 0
        self.ticks = 0
        self.processed = 0

    # packet side -----------------------------------------------------------------
    def push_packet(self, packet: FramePacket) -> List[TickResult]:
        return [self.process_window(w) for w in self.sync.ingest(packet)]

    def note_bad(self, n=1):
        self.bad_packets += n

    def finish(self) -> List[TickResult]:
        out = [self.process_window(w) for w in self.sync.flush()]
        if self.notifier is not None:
            self.notifier.close()
        return out

    # tick side -------------------------------------------------------------------
    def _standby_due(self, ts_us):
        if self.last_detection_us is None:
            self.last_detection_us = ts_us
        return ts_us - self.last_detection_us >= self.cfg.fps.standby_delay_s * 1e6

    def _set_mode(self, mode, tick):
        if mode != self.mode:
            self.mode = mode
            self.mode_changes.append((tick, mode))

    def process_window(self, window: MergedWindow) -> TickResult:
        t0 = time.perf_counter()
        group = self.grouper.push(window)
        t1 = time.perf_counter()
        self.timings["transform"].append(t1 - t0)
        tick, ts = window.index, window.start_us
        self.ticks += 1
        if self.mode == PipelineMode.STANDBY and tick % self.stride != 0:
            return TickResult(tick, ts, self.mode, False)
        res = TickResult(tick, ts, self.mode, True, n_points=len(group.points))
        self.processed += 1

        kept, rejected = bes_filter(group.points, self.thresholds)
        clean, removed = self.grid.subtract(kept)
        t2 = time.perf_counter()
        clusters, noise = dynamic_dbscan(clean, self.cfg.bands)
        if self.mode == PipelineMode.WORKING:
            # the clutter map only learns at the full frame rate
            self.grid.update(tick, rejected, clean[noise], removed)
        t3 = time.perf_counter()
        upd = self.tracker.step(clusters, tick, ts)
        t4 = time.perf_counter()
        res.n_clusters = len(clusters)

        for b in upd.lost:
            self.status.pop(b.track_id, None)
            self.reported.pop(b.track_id, None)
            self.posture.pop(b.track_id, None)
        for b, cl in upd.assigned:
            st = self.status.setdefault(b.track_id, StatusTracker(self.cfg.status))
            raw, _, blurred = st.update(cl)
            b.status = blurred
            if b.state != TrackState.CONFIRMED:
                continue
            ev = emit_fall(b.track_id, self.reported.get(b.track_id), blurred, self.notifier, tick, ts,
                           tuple(cl.centroid), st.window.confidence)
            self.reported[b.track_id] = blurred
            if ev is not None:
                res.events.append(ev)
            acc = self.posture.setdefault(b.track_id, PostureAccumulator(self.cfg.status, self.cfg.sync.group_length))
            if blurred == StatusLabel.FALLEN:
                rep = acc.add(clean[cl.indices], ts)
                if rep is not None:
                    res.postures.append((b.track_id, rep))
            else:
                acc.reset()
            res.rows.append(TrackRow(tick, ts, b.track_id, *map(float, cl.centroid), b.state.value,
                                     blurred.value, tuple(map(float, cl.ground_box))))
        t5 = time.perf_counter()
        self.timings["filter"].append(t2 - t1)
        self.timings["cluster"].append(t3 - t2)
        self.timings["track"].append(t4 - t3)
        self.timings["status"].append(t5 - t4)

        if self.tracker.confirmed or upd.born or (self.mode == PipelineMode.STANDBY and self.tracker.bins):
            self.last_detection_us = ts
            self._set_mode(PipelineMode.WORKING, tick)
        elif self.mode == PipelineMode.WORKING and self._standby_due(ts):
            self._set_mode(PipelineMode.STANDBY, tick)
        return res


# inputs ------------------------------------------------------------------------------

def merged_packets(files: Dict[int, str], on_bad=None) -> Iterable[FramePacket]:
    """Timestamp-ordered merge of several recordings, without threads."""
    def one(rid, path):
        dec = PacketDecoder()
        with open(path, "rb") as fh:
            while True:
                data = fh.read(1 << 16)
                for o in (dec.feed(data) if data else dec.flush()):
                    if isinstance(o, GoodPacket):
                        yield (o.packet.timestamp_us, rid, o.packet.seq), o.packet
                    elif on_bad is not None:
                        on_bad(rid, o)
                if not data:
                    return
    for _, pkt in heapq.merge(*(one(r, p) for r, p in sorted(files.items())), key=lambda kv: kv[0]):
        yield pkt


# outputs -----------------------------------------------------------------------------

TRAJ_FIELDS = ("tick", "timestamp_us", "track_id", "x", "y", "z", "state", "status", "xmin", "ymin", "xmax", "ymax")


class OutputWriter:
    """trajectories.csv, events.jsonl and sync_stats.csv in one directory."""

    def __init__(self, out_dir, pipeline: Pipeline):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.p = pipeline
        self._traj = open(self.dir / "trajectories.csv", "w", newline="", encoding="utf-8")
        self._tw = csv.writer(self._traj)
        self._tw.writerow(TRAJ_FIELDS)
        self._events = open(self.dir / "events.jsonl", "w", encoding="utf-8")
        self._stats = open(self.dir / "sync_stats.csv", "w", newline="", encoding="utf-8")
        self._sw = None
        self.n_events = 0

    def write(self, res: TickResult):
        for r in res.rows:
            self._tw.writerow([r.tick, r.timestamp_us, r.track_id, f"{r.x:.4f}", f"{r.y:.4f}", f"{r.z:.4f}",
                               r.state, r.status, *(f"{v:.4f}" for v in r.box)])
        for ev in res.events:
            self._events.write(json.dumps({"kind": "fall", **ev.record()}, sort_keys=True) + "\n")
            self.n_events += 1
        for tid, rep in res.postures:
            rec = {"kind": "posture", "track_id": tid, "tick": res.tick, "timestamp_us": res.timestamp_us,
                   **rep.record()}
            self._events.write(json.dumps(rec, sort_keys=True) + "\n")
        if res.tick % self.p.cfg.sync.stats_every == 0:
            self.write_stats(res.tick)

    def write_stats(self, tick):
        rec = {"tick": tick, "mode": self.p.mode.value, "bad_packets": self.p.bad_packets,
               **self.p.sync.stats.record()}
        if self._sw is None:
            self._sw = csv.DictWriter(self._stats, fieldnames=list(rec))
            self._sw.writeheader()
        self._sw.writerow(rec)

    def close(self, summary: Optional[dict] = None):
        self.write_stats(self.p.ticks and max(self.p.ticks - 1, 0))
        for fh in (self._traj, self._events, self._stats):
            fh.close()
        if summary is not None:
            (self.dir / "run_summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")


@dataclass
class RunResult:
    summary: dict
    results: List[TickResult]
    pipeline: Pipeline

    @property
    def rows(self):
        return [r for res in self.results for r in res.rows]

    @property
    def events(self):
        return [e for res in self.results for e in res.events]


def run_pipeline(config: PipelineConfig, packets: Iterable[FramePacket], out_dir=None,
                 notifier: Optional[Notifier] = None, pipeline: Optional[Pipeline] = None) -> "RunResult":
    """Drive a pipeline over a packet iterable.

    With ``out_dir`` the tick results go to files; otherwise they are kept
    in memory on the returned object.
    """
    pipe = pipeline or Pipeline(config, notifier)
    writer = OutputWriter(out_dir, pipe) if out_dir is not None else None
    results: List[TickResult] = []
    start = time.perf_counter()

    def handle(batch):
        for r in batch:
            if writer is not None:
                writer.write(r)
            else:
                results.append(r)

    for pkt in packets:
        handle(pipe.push_packet(pkt))
    handle(pipe.finish())
    elapsed = time.perf_counter() - start
    summary = {
        "ticks": pipe.ticks, "processed_ticks": pipe.processed, "elapsed_s": round(elapsed, 3),
        "bad_packets": pipe.bad_packets, "tracks": len(pipe.tracker.bins) + len(pipe.tracker.retired),
        "mode_changes": [[t, m.value] for t, m in pipe.mode_changes],
        "sync": pipe.sync.stats.record(),
    }
    if writer is not None:
        writer.close(summary)
    return RunResult(summary, results, pipe)


def latency_percentiles(timings: Dict[str, List[float]], qs=(50, 95, 99)) -> dict:
    out = {}
    for stage in STAGES:
        v = np.asarray(timings.get(stage, []), dtype=float) * 1e3
        out[stage] = {f"p{q}": (round(float(np.percentile(v, q)), 4) if v.size else math.nan) for q in qs}
    return out
