"""Per-track status: portrait scoring, blur window, fall events, posture."""
from __future__ import annotations

import enum
import json
import logging
import queue
import threading
import urllib.request
from collections import Counter, deque
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .clustering import Cluster
from .config import STATUS_ORDER, StatusLabel, StatusParams, StatusPortrait
from .errors import InsufficientData, NotifierError

log = logging.getLogger(__name__)


def aspect_class(extents, tall_ratio=1.2, flat_ratio=0.8) -> str:
    dx, dy, dz = (float(v) for v in extents)
    r = dz / max(dx, dy, 1e-9)
    if r > tall_ratio:
        return "tall"
    if r < flat_ratio:
        return "flat"
    return "neutral"


_SHAPE_TABLE = {
    "tall": {"tall": 1.0, "neutral": 0.5, "flat": 0.0},
    "flat": {"flat": 1.0, "neutral": 0.5, "tall": 0.0},
    "compact": {"neutral": 1.0, "tall": 0.5, "flat": 0.5},
}


def height_membership(z, portrait: StatusPortrait, tolerance=0.45) -> float:
    return max(0.0, 1.0 - abs(float(z) - portrait.height) / tolerance)


def shape_membership(extents, portrait: StatusPortrait, params: StatusParams = StatusParams()) -> float:
    return _SHAPE_TABLE[portrait.aspect][aspect_class(extents, params.tall_ratio, params.flat_ratio)]


def status_probability(cluster: Cluster, portrait: StatusPortrait,
                       coeffs=(0.7, 0.3), params: StatusParams = StatusParams()) -> float:
    lam, sig = coeffs
    return (lam * height_membership(cluster.centroid[2], portrait, params.height_tolerance)
            + sig * shape_membership(cluster.extents, portrait, params))


def status_scores(cluster: Cluster, params: StatusParams = StatusParams()) -> dict:
    return {p.label: status_probability(cluster, p, params.coefficients, params) for p in params.portraits}


def classify(cluster: Cluster, params: StatusParams = StatusParams()) -> StatusLabel:
    scores = status_scores(cluster, params)
    # max() keeps the first of equal values, so iterate in tie-break order
    return max((lab for lab in STATUS_ORDER if lab in scores), key=lambda lab: scores[lab])


class StatusWindow:
    """Majority vote over the last ``length`` per-tick labels."""

    def __init__(self, length=20):
        if length < 1:
            raise ValueError("blur length must be positive")
        self.length = length
        self.labels: deque = deque(maxlen=length)
        self.counts: Counter = Counter()
        self.current: Optional[StatusLabel] = None

    def push(self, label: StatusLabel) -> StatusLabel:
        if len(self.labels) == self.length:
            self.counts[self.labels[0]] -= 1
        self.labels.append(label)
        self.counts[label] += 1
        top = max(self.counts.values())
        tied = [lab for lab in STATUS_ORDER if self.counts[lab] == top]
        if self.current not in tied:
            self.current = tied[0]
        return self.current

    @property
    def confidence(self) -> float:
        if not self.labels or self.current is None:
            return 0.0
        return self.counts[self.current] / len(self.labels)


def blur(window: StatusWindow, new_label: StatusLabel) -> StatusLabel:
    return window.push(new_label)


@dataclass(frozen=True)
class FallEvent:
    track_id: int
    tick: int
    timestamp_us: int
    position: tuple
    confidence: float

    def record(self) -> dict:
        d = asdict(self)
        d["position"] = [round(float(v), 4) for v in self.position]
        d["confidence"] = round(float(self.confidence), 4)
        return d


# notifier sinks --------------------------------------------------------------

class MemorySink:
    def __init__(self):
        self.records: List[dict] = []

    def deliver(self, record: dict):
        self.records.append(record)


class JournalSink:
    """Appends one JSON line per event."""

    def __init__(self, path):
        self.path = path

    def deliver(self, record: dict):
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


class WebhookSink:
    """POSTs each event as a JSON body."""

    def __init__(self, url: str, timeout=5.0):
        self.url = url
        self.timeout = timeout

    def deliver(self, record: dict):
        req = urllib.request.Request(self.url, data=json.dumps(record).encode(),
                                     headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                if resp.status >= 300:
                    raise NotifierError(f"webhook answered {resp.status}")
        except OSError as exc:
            raise NotifierError(f"webhook unreachable: {exc}") from exc


class Notifier:
    """Journals every event locally, then hands it to the sinks.

    With ``asynchronous=True`` delivery happens on a background thread and
    failures are collected in ``failures``; otherwise a failing sink raises
    NotifierError after the journal write has happened.
    """

    def __init__(self, sinks: Sequence = (), journal: Optional[JournalSink] = None, asynchronous=True):
        self.sinks = list(sinks)
        self.journal = journal
        self.failures: List[NotifierError] = []
        self.delivered = 0
        self._q: Optional[queue.Queue] = None
        self._thread = None
        if asynchronous:
            self._q = queue.Queue(maxsize=1024)
            self._thread = threading.Thread(target=self._run, name="notifier", daemon=True)
            self._thread.start()

    def _deliver(self, record):
        errors = []
        for sink in self.sinks:
            try:
                sink.deliver(record)
            except Exception as exc:  # a broken sink must not stop the others
                errors.append(exc if isinstance(exc, NotifierError) else NotifierError(str(exc)))
        self.delivered += 1
        return errors

    def _run(self):
        while True:
            record = self._q.get()
            if record is None:
                self._q.task_done()
                return
            for err in self._deliver(record):
                log.warning("fall notification failed: %s", err)
                self.failures.append(err)
            self._q.task_done()

    def notify(self, event: FallEvent):
        record = event.record()
        if self.journal is not None:
            self.journal.deliver(record)
        if self._q is not None:
            self._q.put(record)
            return
        errors = self._deliver(record)
        if errors:
            self.failures.extend(errors)
            raise errors[0]

    def close(self):
        if self._thread is not None and self._thread.is_alive():
            self._q.put(None)
            self._thread.join()


def emit_fall(track_id, previous: Optional[StatusLabel], new: StatusLabel, notifier: Optional[Notifier] = None,
              tick=0, timestamp_us=0, position=(0.0, 0.0, 0.0), confidence=1.0) -> Optional[FallEvent]:
    """Edge trigger: an event only when the blurred status turns into Fallen."""
    if new != StatusLabel.FALLEN or previous == StatusLabel.FALLEN:
        return None
    event = FallEvent(int(track_id), int(tick), int(timestamp_us), tuple(float(v) for v in position), float(confidence))
    if notifier is not None:
        notifier.notify(event)
    return event


class StatusTracker:
    """Window plus edge state for one track."""

    def __init__(self, params: StatusParams = StatusParams()):
        self.params = params
        self.window = StatusWindow(params.blur_length)
        self.raw: Optional[StatusLabel] = None

    def update(self, cluster: Cluster):
        """Returns (raw label, previous blurred, new blurred)."""
        self.raw = classify(cluster, self.params)
        prev = self.window.current
        return self.raw, prev, self.window.push(self.raw)


# posture -----------------------------------------------------------------------

class Posture(str, enum.Enum):
    LYING_FACE_UP = "lying_face_up"
    LYING_SIDEWAYS = "lying_sideways"
    SITTING_ON_GROUND = "sitting_on_ground"


@dataclass(frozen=True)
class PostureRules:
    height_edges: tuple = (0.35, 0.75)  # face-up | sideways | sitting
    area_edges: tuple = (0.6, 0.35)  # footprint splits, m^2, same order
    margin: float = 0.05  # near a height edge, the area decides
    bin_size: float = 0.1


@dataclass(frozen=True)
class PostureReport:
    posture: Posture
    area: float
    dominant_height: float
    span_s: float

    def record(self) -> dict:
        return {"posture": self.posture.value, "area": round(self.area, 4),
                "dominant_height": round(self.dominant_height, 4), "span_s": round(self.span_s, 3)}


def footprint_area(points) -> float:
    xy = np.asarray(points, dtype=float)[:, :2]
    if len(np.unique(xy, axis=0)) < 3:
        return 0.0
    try:
        return float(ConvexHull(xy).volume)  # volume is area in 2-D
    except QhullError:
        return 0.0  # collinear


def dominant_height(z, bin_size=0.1) -> float:
    z = np.asarray(z, dtype=float)
    bins = np.floor(z / bin_size).astype(np.int64)
    vals, counts = np.unique(bins, return_counts=True)
    return float((vals[np.argmax(counts)] + 0.5) * bin_size)


def classify_posture(area: float, height: float, rules: PostureRules = PostureRules()) -> Posture:
    order = (Posture.LYING_FACE_UP, Posture.LYING_SIDEWAYS, Posture.SITTING_ON_GROUND)
    idx = int(np.searchsorted(rules.height_edges, height, side="right"))
    for k, edge in enumerate(rules.height_edges):
        if abs(height - edge) < rules.margin:
            return order[k] if area >= rules.area_edges[k] else order[k + 1]
    return order[idx]


def estimate_posture(points, span_s: float, params: StatusParams = StatusParams(),
                     rules: PostureRules = PostureRules()) -> PostureReport:
    pts = np.asarray(points, dtype=float)
    if len(pts) < params.posture_min_points:
        raise InsufficientData(f"{len(pts)} points, need {params.posture_min_points}")
    if span_s < params.posture_horizon_s:
        raise InsufficientData(f"accumulated {span_s:.1f} s, need {params.posture_horizon_s} s")
    area = footprint_area(pts)
    h = dominant_height(pts[:, 2], rules.bin_size)
    return PostureReport(classify_posture(area, h, rules), area, h, float(span_s))


class PostureAccumulator:
    """Collects a fallen track's points until the horizon is covered."""

    def __init__(self, params: StatusParams = StatusParams(), stride=10):
        self.params = params
        self.stride = stride  # frame groups overlap, so sample every stride-th tick
        self.parts: List[np.ndarray] = []
        self.start_us: Optional[int] = None
        self.reported = False
        self._n = 0

    def reset(self):
        self.parts.clear()
        self.start_us = None
        self.reported = False
        self._n = 0

    def add(self, points, timestamp_us) -> Optional[PostureReport]:
        if self.reported:
            return None
        if self.start_us is None:
            self.start_us = timestamp_us
        if self._n % self.stride == 0:
            self.parts.append(np.asarray(points, dtype=float)[:, :3])
        self._n += 1
        span = (timestamp_us - self.start_us) / 1e6
        if span < self.params.posture_horizon_s:
            return None
        try:
            report = estimate_posture(np.concatenate(self.parts), span, self.params)
        except InsufficientData:
            return None
        self.reported = True
        return report

