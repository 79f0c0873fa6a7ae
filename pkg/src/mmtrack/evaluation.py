"""Scoring tracker output against simulator ground truth."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import STATUS_ORDER, StatusLabel
from .errors import AlignmentError, ParseError


@dataclass(frozen=True)
class Criteria:
    max_distance: float = 0.25  # centroid distance on the ground plane, m
    min_overlap: float = 0.7  # ground-box intersection over truth-box area


@dataclass(frozen=True)
class Detection:
    """One box-bearing position on the ground plane (truth actor or predicted track)."""
    ident: int
    x: float
    y: float
    box: tuple  # (xmin, ymin, xmax, ymax)
    status: Optional[StatusLabel] = None
    z: float = 0.0


def box_area(b) -> float:
    return max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])


def overlap_over_truth(pred_box, truth_box) -> float:
    ix = min(pred_box[2], truth_box[2]) - max(pred_box[0], truth_box[0])
    iy = min(pred_box[3], truth_box[3]) - max(pred_box[1], truth_box[1])
    area = box_area(truth_box)
    if area <= 0:
        # degenerate truth box: fall back to containment of its centre
        cx, cy = (truth_box[0] + truth_box[2]) / 2, (truth_box[1] + truth_box[3]) / 2
        return float(pred_box[0] <= cx <= pred_box[2] and pred_box[1] <= cy <= pred_box[3])
    return max(0.0, ix) * max(0.0, iy) / area


def compatible(truth: Detection, pred: Detection, crit: Criteria = Criteria()) -> bool:
    d = np.hypot(truth.x - pred.x, truth.y - pred.y)
    return bool(d <= crit.max_distance and overlap_over_truth(pred.box, truth.box) >= crit.min_overlap)


def match_frame(truths: Sequence[Detection], preds: Sequence[Detection], crit: Criteria = Criteria()):
    """Maximum one-to-one matching of compatible pairs; returns [(truth_idx, pred_idx)]."""
    if not truths or not preds:
        return []
    ok = np.array([[compatible(t, p, crit) for p in preds] for t in truths])
    if not ok.any():
        return []
    # maximise matches, then prefer closer pairs
    dist = np.array([[np.hypot(t.x - p.x, t.y - p.y) for p in preds] for t in truths])
    cost = np.where(ok, -1.0 + dist * 1e-3, 0.0)
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if ok[r, c]]


@dataclass
class MetricsReport:
    positives: int = 0
    true_positives: int = 0
    false_positives: int = 0
    confusion: List[List[int]] = field(default_factory=lambda: [[0] * 3 for _ in range(3)])
    labels: tuple = tuple(s.value for s in STATUS_ORDER)
    id_switches: int = 0  # an actor's matched track id changed
    swaps: int = 0  # tracks matched to more than one actor over the run
    error_mean: float = float("nan")
    error_p95: float = float("nan")
    per_track: Dict[int, dict] = field(default_factory=dict)
    frames: int = 0
    events: int = 0

    @property
    def sensitivity(self) -> float:
        return self.true_positives / self.positives if self.positives else float("nan")

    @property
    def precision(self) -> float:
        d = self.true_positives + self.false_positives
        return self.true_positives / d if d else float("nan")

    @property
    def status_accuracy(self) -> float:
        c = np.asarray(self.confusion)
        return float(np.trace(c) / c.sum()) if c.sum() else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(sensitivity=self.sensitivity, precision=self.precision, status_accuracy=self.status_accuracy)
        d["labels"] = list(self.labels)
        d["per_track"] = {str(k): v for k, v in self.per_track.items()}
        return d


def evaluate(pred_frames: Dict[int, List[Detection]], truth_frames: Dict[int, List[Detection]],
             criteria: Criteria = Criteria(), ticks: Optional[Sequence[int]] = None) -> MetricsReport:
    """Per-tick matching over ``ticks`` (default: every tick with truth or predictions)."""
    rep = MetricsReport()
    idx = {s: i for i, s in enumerate(STATUS_ORDER)}
    if ticks is None:
        ticks = sorted(set(truth_frames) | set(pred_frames))
    last_track: Dict[int, int] = {}
    actors_of: Dict[int, set] = defaultdict(set)
    errors = []
    track_err: Dict[int, list] = defaultdict(list)
    for tick in ticks:
        truths = truth_frames.get(tick, [])
        preds = pred_frames.get(tick, [])
        pairs = match_frame(truths, preds, criteria)
        rep.frames += 1
        rep.positives += len(truths)
        rep.true_positives += len(pairs)
        rep.false_positives += len(preds) - len(pairs)
        for ti, pi in pairs:
            t, p = truths[ti], preds[pi]
            if t.status is not None and p.status is not None:
                rep.confusion[idx[t.status]][idx[p.status]] += 1
            if t.ident in last_track and last_track[t.ident] != p.ident:
                rep.id_switches += 1
            last_track[t.ident] = p.ident
            actors_of[p.ident].add(t.ident)
            e = float(np.hypot(t.x - p.x, t.y - p.y))
            errors.append(e)
            track_err[p.ident].append(e)
    rep.swaps = sum(1 for a in actors_of.values() if len(a) > 1)
    if errors:
        rep.error_mean = float(np.mean(errors))
        rep.error_p95 = float(np.percentile(errors, 95))
    rep.per_track = {k: {"matches": len(v), "mean_error": round(float(np.mean(v)), 4),
                         "actors": sorted(actors_of[k])} for k, v in sorted(track_err.items())}
    return rep


# file side ---------------------------------------------------------------------------

def _read_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except FileNotFoundError:
        raise
    except (csv.Error, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _frames(rows, ident_key):
    frames: Dict[int, List[Detection]] = defaultdict(list)
    clock: Dict[int, int] = {}
    try:
        for r in rows:
            tick = int(r["tick"])
            ts = int(r["timestamp_us"])
            if clock.setdefault(tick, ts) != ts:
                raise AlignmentError(f"tick {tick} carries two timestamps ({clock[tick]} and {ts})")
            status = StatusLabel(r["status"]) if r.get("status") else None
            box = tuple(float(r[k]) for k in ("xmin", "ymin", "xmax", "ymax"))
            frames[tick].append(Detection(int(r[ident_key]), float(r["x"]), float(r["y"]), box, status,
                                          float(r.get("z") or 0.0)))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, AlignmentError):
            raise
        raise ParseError(f"malformed row: {exc}") from exc
    return frames, clock


def load_truth(path):
    return _frames(_read_csv(path), "actor")


def load_predictions(path):
    return _frames(_read_csv(path), "track_id")


def check_alignment(pred_clock: Dict[int, int], truth_clock: Dict[int, int]):
    for tick, ts in pred_clock.items():
        if tick in truth_clock and truth_clock[tick] != ts:
            raise AlignmentError(f"tick {tick}: prediction stamped {ts} us, truth {truth_clock[tick]} us")
    if truth_clock:
        lo, hi = min(truth_clock), max(truth_clock)
        outside = [t for t in pred_clock if t < lo or t > hi]
        # a tick both sides know about pins the clocks; predictions past the truth range cannot be scored
        if outside and len(outside) == len(pred_clock):
            raise AlignmentError("predictions share no ticks with the truth")


def truth_ticks(scenario_meta: Optional[dict], truth_clock: Dict[int, int]):
    if scenario_meta and "duration" in scenario_meta:
        return range(int(round(scenario_meta["duration"] * 20)))
    return sorted(truth_clock)


def evaluate_files(pred_dir, truth_path, criteria: Criteria = Criteria()) -> MetricsReport:
    pred_path = Path(pred_dir)
    if pred_path.is_dir():
        pred_path = pred_path / "trajectories.csv"
    truth_path = Path(truth_path)
    if truth_path.is_dir():
        truth_path = truth_path / "truth.csv"
    truth, tclock = load_truth(truth_path)
    preds, pclock = load_predictions(pred_path)
    check_alignment(pclock, tclock)
    meta = None
    meta_path = truth_path.parent / "scenario.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    ticks = truth_ticks(meta, tclock)
    rep = evaluate(preds, truth, criteria, ticks)
    events_path = pred_path.parent / "events.jsonl"
    if events_path.exists():
        with open(events_path, encoding="utf-8") as fh:
            rep.events = sum(1 for line in fh if '"kind": "fall"' in line)
    return rep


def fall_latencies(event_ticks: Sequence[int], contact_ticks: Sequence[int], window=40):
    """For each scripted contact, ticks until the first event within ``window``; None when missed."""
    out = []
    for c in contact_ticks:
        hits = [e - c for e in event_ticks if -window <= e - c <= window]
        out.append(min(hits, key=abs) if hits else None)
    return out


def truth_frames(rows) -> Dict[int, List[Detection]]:
    """Group simulator TruthRows by tick."""
    out: Dict[int, List[Detection]] = defaultdict(list)
    for r in rows:
        out[r.tick].append(Detection(r.actor, r.x, r.y, tuple(r.box), r.status, r.z))
    return out


def prediction_frames(rows) -> Dict[int, List[Detection]]:
    """Group pipeline TrackRows by tick."""
    out: Dict[int, List[Detection]] = defaultdict(list)
    for r in rows:
        out[r.tick].append(Detection(r.track_id, r.x, r.y, tuple(r.box), StatusLabel(r.status), r.z))
    return out
