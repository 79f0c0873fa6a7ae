"""Domain types and the JSON configuration schema.

Point clouds travel through the pipeline as ``(N, 5)`` float arrays with
columns ``x, y, z, energy, speed``; :class:`RadarPoint` is the scalar view
of one row. Everything else here is a frozen dataclass built from a JSON
document with the top-level keys ``radars``, ``room``, ``bands``,
``tracking``, ``status``, ``sync``, ``fps`` and ``background``.
"""
from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple, Optional

import numpy as np

from .errors import ParseError, ValidationError

POINT_COLUMNS = ("x", "y", "z", "energy", "speed")


class RadarPoint(NamedTuple):
    x: float
    y: float
    z: float
    energy: float
    speed: float

    def validate(self):
        if not all(math.isfinite(v) for v in self):
            raise ValidationError("point", "non-finite component")
        if self.energy < 0:
            raise ValidationError("point.energy", "must be >= 0")
        return self


def points_array(points) -> np.ndarray:
    """Coerce a list of RadarPoint (or anything array-like) to an (N, 5) float array."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 5))
    return arr.reshape(-1, 5)


class StatusLabel(str, enum.Enum):
    STANDING = "standing"
    SITTING = "sitting"
    FALLEN = "fallen"


# Used when argmax ties: Standing > Sitting > Fallen.
STATUS_ORDER = (StatusLabel.STANDING, StatusLabel.SITTING, StatusLabel.FALLEN)


@dataclass(frozen=True)
class FieldOfView:
    horizontal: float = 50.0
    vertical: float = 30.0
    max_range: float = 8.0


@dataclass(frozen=True)
class RadarPose:
    radar_id: int
    position: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = (0.0, 0.0, 0.0)  # degrees about x, y, z
    fov: FieldOfView = FieldOfView()


@dataclass(frozen=True)
class RoomBounds:
    x_range: tuple = (-2.4, 1.6)
    y_range: tuple = (0.0, 4.2)
    z_range: tuple = (0.0, 2.6)

    def contains(self, xyz: np.ndarray) -> np.ndarray:
        xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
        lo = np.array([self.x_range[0], self.y_range[0], self.z_range[0]])
        hi = np.array([self.x_range[1], self.y_range[1], self.z_range[1]])
        return np.all((xyz >= lo) & (xyz <= hi), axis=1)


@dataclass(frozen=True)
class EnergyBand:
    low: float
    high: float  # math.inf for the open top band
    eps: float
    min_pts: int

    def contains(self, energy):
        return (energy >= self.low) & (energy < self.high)


DEFAULT_BANDS = (
    EnergyBand(400.0, math.inf, 1.0, 2),
    EnergyBand(300.0, 400.0, 1.0, 2),
    EnergyBand(200.0, 300.0, 0.7, 3),
    EnergyBand(0.0, 200.0, 0.5, 10),
)


@dataclass(frozen=True)
class Expectation:
    """Triangular membership: 0 at ``low``/``high``, 1 at ``peak``."""

    low: float
    peak: float
    high: float

    def __call__(self, value):
        v = np.asarray(value, dtype=float)
        up = np.where(v <= self.peak,
                      (v - self.low) / max(self.peak - self.low, 1e-12),
                      (self.high - v) / max(self.high - self.peak, 1e-12))
        out = np.clip(up, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TrackingParams:
    coefficients: tuple = (0.3, 0.3, 0.2, 0.2)
    z_cut: float = 3.0
    neighbor_radius: float = 0.5
    confirm_hits: int = 5
    tentative_miss_limit: int = 2
    timeout_s: float = 3.0
    birth_threshold: float = 0.5
    history: int = 20
    min_std_pos: float = 0.1
    min_std_shape: float = 0.2
    centroid_z: Expectation = Expectation(0.1, 0.9, 1.3)
    box_height: Expectation = Expectation(0.2, 1.5, 2.4)


@dataclass(frozen=True)
class StatusPortrait:
    label: StatusLabel
    height: float
    aspect: str  # "tall", "flat" or "compact"
    extents: tuple  # expected box (dx, dy, dz), metres


DEFAULT_PORTRAITS = (
    StatusPortrait(StatusLabel.STANDING, 1.0, "tall", (0.5, 0.5, 1.7)),
    StatusPortrait(StatusLabel.SITTING, 0.6, "compact", (0.6, 0.7, 1.2)),
    StatusPortrait(StatusLabel.FALLEN, 0.2, "flat", (1.7, 0.5, 0.4)),
)


@dataclass(frozen=True)
class StatusParams:
    coefficients: tuple = (0.7, 0.3)
    blur_length: int = 20
    portraits: tuple = DEFAULT_PORTRAITS
    height_tolerance: float = 0.45
    tall_ratio: float = 1.2
    flat_ratio: float = 0.8
    posture_horizon_s: float = 30.0
    posture_min_points: int = 50


@dataclass(frozen=True)
class SyncParams:
    window_s: float = 0.05
    group_length: int = 10
    fifo_capacity: int = 8
    grace_windows: float = 2.0
    stats_every: int = 100


@dataclass(frozen=True)
class FpsParams:
    working: float = 20.0
    standby: float = 1.0
    standby_delay_s: float = 30.0


@dataclass(frozen=True)
class BackgroundParams:
    voxel: float = 0.2
    persistence_s: float = 15.0
    persistence_fraction: float = 0.9
    decay_s: float = 60.0
    min_energy: float = 30.0
    speed_band: tuple = (0.0, 8.0)


DEFAULT_RADARS = (
    RadarPose(1, (0.0, 0.0, 1.0), (0.0, 0.0, 0.0)),
    RadarPose(2, (1.6, 2.1, 2.6), (-55.0, 0.0, 90.0)),
    RadarPose(3, (0.0, 2.1, 2.6), (-90.0, 0.0, 0.0)),
)


@dataclass(frozen=True)
class PipelineConfig:
    radars: tuple = DEFAULT_RADARS
    room: RoomBounds = RoomBounds()
    bands: tuple = DEFAULT_BANDS
    tracking: TrackingParams = TrackingParams()
    status: StatusParams = StatusParams()
    sync: SyncParams = SyncParams()
    fps: FpsParams = FpsParams()
    background: BackgroundParams = BackgroundParams()

    def __post_init__(self):
        validate(self)

    def radar(self, radar_id) -> RadarPose:
        for r in self.radars:
            if r.radar_id == radar_id:
                return r
        raise KeyError(radar_id)

    @property
    def radar_ids(self):
        return tuple(r.radar_id for r in self.radars)


# ---------------------------------------------------------------- validation

def _check(cond, name, msg):
    if not cond:
        raise ValidationError(name, msg)


def _interval(name, iv):
    _check(len(iv) == 2 and all(math.isfinite(v) for v in iv), name, "need two finite numbers")
    _check(iv[0] <= iv[1], name, "empty interval")


def validate(cfg: PipelineConfig):
    _check(len(cfg.radars) >= 1, "radars", "at least one radar required")
    ids = [r.radar_id for r in cfg.radars]
    _check(len(set(ids)) == len(ids), "radars.id", "radar ids must be unique")
    for r in cfg.radars:
        name = f"radars[{r.radar_id}]"
        _check(len(r.position) == 3 and all(math.isfinite(v) for v in r.position),
               name + ".position", "need three finite numbers")
        _check(len(r.rotation) == 3 and all(-180.0 <= v <= 180.0 for v in r.rotation),
               name + ".rotation", "angles must lie in [-180, 180]")
        f = r.fov
        _check(0 < f.horizontal <= 90 and 0 < f.vertical <= 90, name + ".fov", "half-angles in (0, 90]")
        _check(f.max_range > 0, name + ".fov.max_range", "must be > 0")

    _interval("room.x", cfg.room.x_range)
    _interval("room.y", cfg.room.y_range)
    _interval("room.z", cfg.room.z_range)
    _check(cfg.room.z_range[0] >= 0, "room.z", "floor must be >= 0")

    bands = sorted(cfg.bands, key=lambda b: b.low)
    _check(len(bands) >= 1, "bands", "at least one band required")
    _check(bands[0].low == 0.0, "bands", "bands must start at 0")
    _check(bands[-1].high == math.inf, "bands", "top band must be open-ended")
    for a, b in zip(bands, bands[1:]):
        _check(a.high <= b.low, "bands", f"bands [{a.low},{a.high}) and [{b.low},{b.high}) overlap")
        _check(a.high == b.low, "bands", f"gap between {a.high} and {b.low}")
    for b in bands:
        _check(b.low < b.high, "bands", f"band [{b.low},{b.high}) is empty")
        _check(b.eps > 0, "bands.eps", "must be > 0")
        _check(b.min_pts >= 1, "bands.min_pts", "must be >= 1")

    t = cfg.tracking
    _check(len(t.coefficients) == 4 and min(t.coefficients) >= 0, "tracking.coefficients", "need four non-negative weights")
    _check(abs(sum(t.coefficients) - 1.0) <= 1e-9, "tracking.coefficients", "must sum to 1")
    _check(t.z_cut > 0, "tracking.z_cut", "must be > 0")
    _check(t.confirm_hits >= 1, "tracking.confirm_hits", "must be >= 1")
    _check(t.timeout_s > 0, "tracking.timeout_s", "must be > 0")

    s = cfg.status
    _check(len(s.coefficients) == 2 and min(s.coefficients) >= 0, "status.coefficients", "need two non-negative weights")
    _check(abs(sum(s.coefficients) - 1.0) <= 1e-9, "status.coefficients", "must sum to 1")
    _check(s.blur_length >= 1, "status.blur_length", "must be >= 1")
    labels = [p.label for p in s.portraits]
    _check(sorted(labels) == sorted(StatusLabel), "status.portraits", "need exactly one portrait per label")
    for p in s.portraits:
        _check(p.height > 0, f"status.portraits.{p.label.value}.height", "must be > 0")
        _check(p.aspect in ("tall", "flat", "compact"), f"status.portraits.{p.label.value}.aspect", "unknown aspect")

    _check(cfg.sync.window_s > 0, "sync.window_s", "must be > 0")
    _check(cfg.sync.group_length >= 1, "sync.group_length", "must be >= 1")
    _check(cfg.sync.fifo_capacity >= 1, "sync.fifo_capacity", "must be >= 1")
    _check(cfg.fps.working > 0 and cfg.fps.standby > 0, "fps", "rates must be > 0")
    _check(cfg.fps.standby <= cfg.fps.working, "fps.standby", "must not exceed working rate")

    bg = cfg.background
    _check(bg.voxel > 0, "background.voxel", "must be > 0")
    _check(0 < bg.persistence_fraction <= 1, "background.persistence_fraction", "must lie in (0, 1]")
    _check(bg.min_energy >= 0, "background.min_energy", "must be >= 0")
    _interval("background.speed_band", bg.speed_band)
    _check(bg.speed_band[0] >= 0, "background.speed_band", "magnitudes must be >= 0")


# ---------------------------------------------------------- dict round-trip

def _band_to_dict(b):
    return {"low": b.low, "high": None if b.high == math.inf else b.high,
            "eps": b.eps, "min_pts": b.min_pts}


def to_dict(cfg: PipelineConfig) -> dict:
    t = asdict(cfg.tracking)
    t["coefficients"] = list(cfg.tracking.coefficients)
    for key in ("centroid_z", "box_height"):
        e = getattr(cfg.tracking, key)
        t[key] = [e.low, e.peak, e.high]
    s = {
        "coefficients": list(cfg.status.coefficients),
        "blur_length": cfg.status.blur_length,
        "portraits": {p.label.value: {"height": p.height, "aspect": p.aspect,
                                      "extents": list(p.extents)}
                      for p in cfg.status.portraits},
    }
    for f in fields(StatusParams):
        if f.name not in s:
            s[f.name] = getattr(cfg.status, f.name)
    bg = asdict(cfg.background)
    bg["speed_band"] = list(cfg.background.speed_band)
    return {
        "radars": [{"id": r.radar_id, "position": list(r.position), "rotation": list(r.rotation),
                    "fov": asdict(r.fov)} for r in cfg.radars],
        "room": {"x": list(cfg.room.x_range), "y": list(cfg.room.y_range), "z": list(cfg.room.z_range)},
        "bands": [_band_to_dict(b) for b in cfg.bands],
        "tracking": t,
        "status": s,
        "sync": asdict(cfg.sync),
        "fps": asdict(cfg.fps),
        "background": bg,
    }


def _known(section, cls, data):
    names = {f.name for f in fields(cls)}
    extra = set(data) - names
    if extra:
        raise ValidationError(f"{section}.{sorted(extra)[0]}", "unknown key")


def _tuple(v, name, n=None):
    if not isinstance(v, (list, tuple)):
        raise ValidationError(name, "expected a list")
    if n is not None and len(v) != n:
        raise ValidationError(name, f"expected {n} values")
    return tuple(float(x) for x in v)


def from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ParseError("configuration root must be an object")
    unknown = set(data) - {"radars", "room", "bands", "tracking", "status", "sync", "fps", "background"}
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown top-level key")
    kw = {}
    try:
        if "radars" in data:
            radars = []
            for i, r in enumerate(data["radars"]):
                fov = FieldOfView(**r.get("fov", {}))
                radars.append(RadarPose(int(r["id"]),
                                        _tuple(r.get("position", (0, 0, 0)), f"radars[{i}].position", 3),
                                        _tuple(r.get("rotation", (0, 0, 0)), f"radars[{i}].rotation", 3),
                                        fov))
            kw["radars"] = tuple(radars)
        if "room" in data:
            room = data["room"]
            kw["room"] = RoomBounds(_tuple(room["x"], "room.x", 2), _tuple(room["y"], "room.y", 2),
                                    _tuple(room["z"], "room.z", 2))
        if "bands" in data:
            kw["bands"] = tuple(
                EnergyBand(float(b["low"]), math.inf if b.get("high") is None else float(b["high"]),
                           float(b["eps"]), int(b["min_pts"]))
                for b in data["bands"])
        if "tracking" in data:
            t = dict(data["tracking"])
            _known("tracking", TrackingParams, t)
            if "coefficients" in t:
                t["coefficients"] = _tuple(t["coefficients"], "tracking.coefficients", 4)
            for key in ("centroid_z", "box_height"):
                if key in t:
                    t[key] = Expectation(*_tuple(t[key], f"tracking.{key}", 3))
            kw["tracking"] = TrackingParams(**t)
        if "status" in data:
            s = dict(data["status"])
            _known("status", StatusParams, s)
            if "coefficients" in s:
                s["coefficients"] = _tuple(s["coefficients"], "status.coefficients", 2)
            if "portraits" in s:
                s["portraits"] = tuple(
                    StatusPortrait(StatusLabel(label), float(p["height"]), p.get("aspect", "compact"),
                                   _tuple(p.get("extents", (0.5, 0.5, 1.0)), f"status.portraits.{label}.extents", 3))
                    for label, p in s["portraits"].items())
            kw["status"] = StatusParams(**s)
        for key, cls in (("sync", SyncParams), ("fps", FpsParams), ("background", BackgroundParams)):
            if key in data:
                section = dict(data[key])
                _known(key, cls, section)
                if key == "background" and "speed_band" in section:
                    section["speed_band"] = _tuple(section["speed_band"], "background.speed_band", 2)
                kw[key] = cls(**section)
    except ValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(type(exc).__name__, str(exc)) from exc
    return PipelineConfig(**kw)


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return from_dict(data)


def dump_config(cfg: PipelineConfig, path=None) -> str:
    text = json.dumps(to_dict(cfg), indent=2)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


def resolve_config(path: Optional[str] = None) -> PipelineConfig:
    """Explicit path, else ``$MMTRACK_CONFIG``, else the built-in room."""
    path = path or os.environ.get("MMTRACK_CONFIG")
    return load_config(path) if path else PipelineConfig()
