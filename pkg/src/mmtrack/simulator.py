"""Scripted synthetic radar scenes.

Actors follow waypoint paths and a status timeline. Every tick each radar
sees a Poisson number of body-scatter points drawn from four body regions
(head, chest, abdomen, legs), posed for standing, sitting or lying and
blended continuously during a scripted fall. Points are moved into the
radar's frame, jittered, snapped to the range grid and kept only inside
the field of view, then packed into frame packets alongside low-energy
clutter and ghost returns. Everything random comes from one seeded
generator, so a scenario plus a seed pins the output bytes.
"""
from __future__ import annotations

import csv
import json
import math
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from .codec import FramePacket, GoodPacket, PacketDecoder, encode
from .config import DEFAULT_RADARS, RadarPose, RoomBounds, StatusLabel
from .errors import ScriptError, ValidationError
from .geometry import apply_transform, build_transform, in_field_of_view, invert
from .radar_math import ChirpParams, range_resolution
from .sync import PacketFeed

FRAME_RATE = 20.0
TICK_US = 50_000
REGIONS = ("head", "chest", "abdomen", "legs")

# region layouts for a 1.75 m body: (forward, lateral, up) centre and spread.
# Heights are scaled by body height / 1.75, lateral spread by shoulder / 0.45.
_POSES = {
    "standing": {
        "centre": [(0.0, 0.0, 1.63), (0.0, 0.0, 1.26), (0.0, 0.0, 0.96), (0.0, 0.0, 0.44)],
        "spread": [(0.05, 0.05, 0.05), (0.07, 0.09, 0.10), (0.07, 0.08, 0.08), (0.07, 0.07, 0.20)],
        "share": (0.12, 0.36, 0.26, 0.26),
    },
    "sitting": {
        "centre": [(0.0, 0.0, 1.10), (0.0, 0.0, 0.85), (0.05, 0.0, 0.55), (0.30, 0.0, 0.30)],
        "spread": [(0.05, 0.05, 0.05), (0.07, 0.09, 0.09), (0.08, 0.09, 0.06), (0.14, 0.08, 0.12)],
        "share": (0.10, 0.30, 0.30, 0.30),
    },
    "fallen": {
        "centre": [(0.80, 0.0, 0.18), (0.45, 0.0, 0.22), (0.10, 0.0, 0.20), (-0.45, 0.0, 0.15)],
        "spread": [(0.05, 0.05, 0.05), (0.09, 0.10, 0.06), (0.08, 0.09, 0.05), (0.20, 0.08, 0.05)],
        "share": (0.12, 0.33, 0.25, 0.30),
    },
}
# per region mean; the chest is strongest and its tail reaches the lenient
# high-energy bands, the rest sits in the two lower bands
_ENERGY = (150.0, 250.0, 190.0, 130.0)
_ENERGY_SD = 40.0
_HUMAN_MIN_ENERGY = 40.0


@dataclass(frozen=True)
class BodyTemplate:
    height: float = 1.75
    shoulder: float = 0.45


@dataclass(frozen=True)
class StatusChange:
    time: float
    label: StatusLabel
    fall_duration: Optional[float] = None  # set for a fall directive
    transition: float = 0.6  # seconds to settle into a non-fall status

    @property
    def duration(self):
        return self.fall_duration if self.fall_duration is not None else self.transition


@dataclass
class ActorScript:
    actor_id: int
    waypoints: list  # (t, x, y)
    timeline: list = field(default_factory=list)  # StatusChange, time ordered
    body: BodyTemplate = BodyTemplate()
    appear: float = 0.0
    leave: float = math.inf

    def validate(self, room: RoomBounds = RoomBounds()):
        def fail(t, msg):
            raise ScriptError("actors", f"actor {self.actor_id} at t={t}: {msg}")
        if not self.waypoints:
            fail(0.0, "needs at least one waypoint")
        prev = -math.inf
        for t, x, y in self.waypoints:
            if not t > prev:
                fail(t, "waypoint times must strictly increase")
            prev = t
            if not (room.x_range[0] <= x <= room.x_range[1] and room.y_range[0] <= y <= room.y_range[1]):
                fail(t, f"waypoint ({x}, {y}) outside the room")
        prev = -math.inf
        for ch in self.timeline:
            if not ch.time > prev:
                fail(ch.time, "timeline times must strictly increase")
            prev = ch.time
            if ch.duration <= 0:
                fail(ch.time, "transition durations must be positive")
        if self.body.height <= 0 or self.body.shoulder <= 0:
            fail(0.0, "body dimensions must be positive")
        if self.leave <= self.appear:
            fail(self.appear, "leave time must follow appear time")
        return self

    def present(self, t):
        return self.appear <= t < self.leave

    @property
    def _w(self):
        # waypoints are fixed once the script runs; keep one array copy
        key = id(self.waypoints), len(self.waypoints)
        if getattr(self, "_wkey", None) != key:
            self._wkey, self._warr = key, np.asarray(self.waypoints, dtype=float)
        return self._warr

    def position(self, t):
        w = self._w
        return np.array([np.interp(t, w[:, 0], w[:, 1]), np.interp(t, w[:, 0], w[:, 2])])

    def velocity(self, t, dt=1e-3):
        return (self.position(t + dt) - self.position(t - dt)) / (2 * dt)

    def heading(self, t):
        """Facing direction: direction of travel, held while standing still."""
        w = self._w
        k = int(np.searchsorted(w[:, 0], t, side="right"))
        for i in range(min(k, len(w) - 1), 0, -1):
            d = w[i, 1:] - w[i - 1, 1:]
            if np.hypot(*d) > 1e-9:
                return math.atan2(d[1], d[0])
        return math.pi / 2

    def posture(self, t):
        """Posture coordinate q: 0 standing, 1 sitting, 2 fallen."""
        q = 0.0
        for ch in self.timeline:
            if t < ch.time:
                break
            target = _POSTURE_Q[ch.label]
            f = min(1.0, (t - ch.time) / ch.duration)
            q = q + (target - q) * f
        return q

    def contact_times(self):
        """Times at which scripted falls reach the ground."""
        return [ch.time + ch.fall_duration for ch in self.timeline if ch.fall_duration is not None]


_POSTURE_Q = {StatusLabel.STANDING: 0.0, StatusLabel.SITTING: 1.0, StatusLabel.FALLEN: 2.0}


def truth_label(q) -> StatusLabel:
    if q < 0.5:
        return StatusLabel.STANDING
    if q < 1.5:
        return StatusLabel.SITTING
    return StatusLabel.FALLEN


def body_layout(q, body: BodyTemplate = BodyTemplate()):
    """(centres, spreads, shares) in the body frame for posture ``q``."""
    if q <= 1.0:
        a, b, f = _POSES["standing"], _POSES["sitting"], q
    else:
        a, b, f = _POSES["sitting"], _POSES["fallen"], q - 1.0
    lerp = lambda key: (1 - f) * np.asarray(a[key]) + f * np.asarray(b[key])
    centre, spread, share = lerp("centre"), lerp("spread"), lerp("share")
    k, w = body.height / 1.75, body.shoulder / 0.45
    return centre * np.array([k, w, k]), spread * np.array([1.0, w, 1.0]), share / share.sum()


def _to_room(local, xy, heading):
    c, s = math.cos(heading), math.sin(heading)
    out = np.empty_like(local)
    out[:, 0] = xy[0] + c * local[:, 0] - s * local[:, 1]
    out[:, 1] = xy[1] + s * local[:, 0] + c * local[:, 1]
    out[:, 2] = local[:, 2]
    return out


def actor_truth(script: ActorScript, t):
    """(centroid, ground box, label) of the body at time ``t``."""
    q = script.posture(t)
    centre, spread, share = body_layout(q, script.body)
    xy = script.position(t)
    h = _actor_heading(script, t)
    centroid = _to_room((share[:, None] * centre).sum(axis=0, keepdims=True), xy, h)[0]
    corners = []
    for c, s in zip(centre, spread):
        for du in (-s[0], s[0]):
            for dv in (-s[1], s[1]):
                corners.append((c[0] + du, c[1] + dv, 0.0))
    room = _to_room(np.asarray(corners), xy, h)
    box = (room[:, 0].min(), room[:, 1].min(), room[:, 0].max(), room[:, 1].max())
    return centroid, box, truth_label(q)


def _actor_heading(script: ActorScript, t):
    # a fall keeps the heading it started with
    for ch in script.timeline:
        if ch.fall_duration is not None and t >= ch.time:
            t = min(t, ch.time)
    return script.heading(t)


@dataclass(frozen=True)
class ClutterSource:
    position: tuple
    rate: float = 0.15  # points per frame per radar
    energy: float = 70.0


@dataclass(frozen=True)
class SimProfile:
    moving_rate: float = 25.0
    stationary_rate: float = 6.0
    stationary_energy: float = 0.75  # energy factor while still
    moving_speed: float = 0.05  # m/s above which an actor counts as moving
    jitter: float = 0.03
    ghost_rate: float = 1.0
    clutter: tuple = (ClutterSource((-1.9, 3.7, 0.5)), ClutterSource((1.2, 0.5, 0.75)))
    drop: float = 0.0
    corrupt: float = 0.0
    frame_rate: float = FRAME_RATE
    quantize: bool = True
    timestamp_offsets_us: tuple = (1_000, 9_000, 17_000)
    timestamp_jitter_us: int = 4_000

    def validate(self):
        for name in ("drop", "corrupt"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"profile.{name}", "probability must lie in [0, 1]")
        for name in ("moving_rate", "stationary_rate", "ghost_rate", "jitter"):
            if getattr(self, name) < 0:
                raise ValidationError(f"profile.{name}", "must be >= 0")
        if self.stationary_rate >= self.moving_rate:
            raise ValidationError("profile.stationary_rate", "must be below moving_rate")
        if self.frame_rate != FRAME_RATE:
            raise ValidationError("profile.frame_rate", f"only {FRAME_RATE} Hz is supported")
        if max(self.timestamp_offsets_us) + self.timestamp_jitter_us >= TICK_US:
            raise ValidationError("profile.timestamp_offsets_us", "stamps must stay inside the tick")
        return self


@dataclass
class Scenario:
    actors: List[ActorScript]
    duration: float
    seed: int = 0
    profile: SimProfile = SimProfile()
    radars: tuple = DEFAULT_RADARS
    room: RoomBounds = RoomBounds()
    name: str = "scenario"

    @property
    def n_ticks(self):
        return int(round(self.duration * FRAME_RATE))

    def validate(self):
        if self.duration <= 0:
            raise ScriptError("duration", "must be positive")
        ids = [a.actor_id for a in self.actors]
        if len(set(ids)) != len(ids):
            raise ScriptError("actors", "actor ids must be unique")
        for a in self.actors:
            a.validate(self.room)
        self.profile.validate()
        return self


# scenario files ------------------------------------------------------------------

def _change_from(entry) -> StatusChange:
    t, what = float(entry[0]), str(entry[1]).lower()
    if what == "fall":
        return StatusChange(t, StatusLabel.FALLEN, float(entry[2]) if len(entry) > 2 else 1.0)
    return StatusChange(t, StatusLabel(what))


def scenario_from_dict(d: dict, seed: Optional[int] = None) -> Scenario:
    try:
        actors = []
        for a in d["actors"]:
            actors.append(ActorScript(
                int(a["id"]), [tuple(map(float, w)) for w in a["waypoints"]],
                [_change_from(e) for e in a.get("timeline", [])],
                BodyTemplate(**a.get("body", {})),
                float(a.get("appear", 0.0)), float(a.get("leave", math.inf))))
        prof = dict(d.get("profile", {}))
        if "clutter" in prof:
            prof["clutter"] = tuple(ClutterSource(tuple(c["position"]), c.get("rate", 0.15), c.get("energy", 70.0))
                                    for c in prof["clutter"])
        for k in ("timestamp_offsets_us",):
            if k in prof:
                prof[k] = tuple(prof[k])
        sc = Scenario(actors, float(d["duration"]), int(d.get("seed", 0) if seed is None else seed),
                      SimProfile(**prof), name=str(d.get("name", "scenario")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ScriptError("scenario", f"malformed scenario: {exc}") from exc
    return sc.validate()


def scenario_to_dict(sc: Scenario) -> dict:
    actors = []
    for a in sc.actors:
        tl = [[c.time, "fall", c.fall_duration] if c.fall_duration is not None else [c.time, c.label.value]
              for c in a.timeline]
        entry = {"id": a.actor_id, "waypoints": [list(w) for w in a.waypoints], "timeline": tl,
                 "body": asdict(a.body), "appear": a.appear}
        if math.isfinite(a.leave):
            entry["leave"] = a.leave
        actors.append(entry)
    prof = asdict(sc.profile)
    prof["clutter"] = [{"position": list(c.position), "rate": c.rate, "energy": c.energy} for c in sc.profile.clutter]
    prof["timestamp_offsets_us"] = list(sc.profile.timestamp_offsets_us)
    return {"name": sc.name, "duration": sc.duration, "seed": sc.seed, "actors": actors, "profile": prof}


def load_scenario(path_or_name, seed: Optional[int] = None) -> Scenario:
    """Load a scenario file, or a bundled scenario by name."""
    p = Path(path_or_name)
    if not p.exists():
        from . import scenarios
        return scenarios.get(str(path_or_name), seed)
    with open(p, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScriptError("scenario", f"{p}: {exc}") from exc
    return scenario_from_dict(data, seed)


# generation ----------------------------------------------------------------------

@dataclass
class TruthRow:
    tick: int
    timestamp_us: int
    actor: int
    x: float
    y: float
    z: float
    status: StatusLabel
    box: tuple  # ground box (xmin, ymin, xmax, ymax)


@dataclass
class SimOutput:
    packets: Dict[int, List[FramePacket]]  # every generated packet, before drop/corruption
    streams: Dict[int, bytes]  # what goes on the wire
    truth: List[TruthRow]
    dropped: Dict[int, int]
    corrupted: Dict[int, int]
    counts: Dict[int, np.ndarray]  # body points per radar per tick (before packing)


class _Pose(NamedTuple):
    centre: np.ndarray
    spread: np.ndarray
    share: np.ndarray
    xy: np.ndarray
    heading: float
    centre_next: np.ndarray
    xy_next: np.ndarray
    heading_next: float
    moving: bool


class Simulator:
    def __init__(self, scenario: Scenario):
        self.sc = scenario.validate()
        self.rng = np.random.default_rng(scenario.seed)
        self.res = range_resolution(ChirpParams())
        self.poses: Dict[int, RadarPose] = {r.radar_id: r for r in scenario.radars}
        self.to_local = {r.radar_id: invert(build_transform(r)) for r in scenario.radars}
        self.to_room = {r.radar_id: build_transform(r) for r in scenario.radars}

    def _finish(self, rid, room_pts, speed_vec, energy):
        """Room-frame points -> visible radar-local (N, 5) rows."""
        if len(room_pts) == 0:
            return np.zeros((0, 5))
        local = apply_transform(self.to_local[rid], room_pts)
        p = self.sc.profile
        if p.jitter > 0:
            local += self.rng.normal(0.0, p.jitter, local.shape)
        if p.quantize:
            r = np.linalg.norm(local, axis=1)
            rq = np.round(r / self.res) * self.res
            local *= (rq / np.maximum(r, 1e-12))[:, None]
        unit = local / np.maximum(np.linalg.norm(local, axis=1), 1e-12)[:, None]
        v_local = speed_vec @ self.to_local[rid].rotation.T
        radial = np.einsum("ij,ij->i", unit, v_local) + self.rng.normal(0.0, 0.05, len(local))
        rows = np.column_stack([local, energy, radial])
        return rows[in_field_of_view(self.poses[rid].fov, local)]

    def _pose(self, actor: ActorScript, t):
        """Radar-independent body state at ``t`` plus a one-tick look-ahead for velocities."""
        dt = 1.0 / FRAME_RATE
        centre, spread, share = body_layout(actor.posture(t), actor.body)
        c2, _, _ = body_layout(actor.posture(t + dt), actor.body)
        return _Pose(centre, spread, share, actor.position(t), _actor_heading(actor, t),
                     c2, actor.position(t + dt), _actor_heading(actor, t + dt), self._moving(actor, t))

    def _body_points(self, actor: ActorScript, t, rid, n, pose: Optional["_Pose"] = None):
        pose = pose or self._pose(actor, t)
        centre, spread, share, xy, h, c2, xy2, h2 = pose[:8]
        dt = 1.0 / FRAME_RATE
        out, vel, energy = [], [], []
        got, tries = 0, 0
        e_scale = 1.0 if pose.moving else self.sc.profile.stationary_energy
        while got < n and tries < 8:
            m = max(2 * (n - got), 4)
            reg = self.rng.choice(4, size=m, p=share)
            local = centre[reg] + self.rng.normal(size=(m, 3)) * spread[reg]
            local[:, 2] = np.maximum(local[:, 2], 0.02)
            room = _to_room(local, xy, h)
            room2 = _to_room(c2[reg] + (local - centre[reg]), xy2, h2)
            lp = apply_transform(self.to_local[rid], room)
            ok = in_field_of_view(self.poses[rid].fov, lp)
            k = min(int(ok.sum()), n - got)
            idx = np.flatnonzero(ok)[:k]
            out.append(room[idx])
            vel.append((room2[idx] - room[idx]) / dt)
            e = self.rng.normal(np.asarray(_ENERGY)[reg[idx]] * e_scale, _ENERGY_SD * e_scale)
            energy.append(np.maximum(e, _HUMAN_MIN_ENERGY))
            got += k
            tries += 1
        if not out:
            return np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0)
        return np.concatenate(out), np.concatenate(vel), np.concatenate(energy)

    def _moving(self, actor, t):
        if np.hypot(*actor.velocity(t)) > self.sc.profile.moving_speed:
            return True
        return any(c.time <= t < c.time + c.duration for c in actor.timeline)

    def rate(self, actor, t):
        p = self.sc.profile
        return p.moving_rate if self._moving(actor, t) else p.stationary_rate

    def _ghosts(self, rid):
        n = self.rng.poisson(self.sc.profile.ghost_rate)
        if n == 0:
            return np.zeros((0, 5))
        fov = self.poses[rid].fov
        r = self.rng.uniform(0.3, fov.max_range, n)
        az = np.radians(self.rng.uniform(-fov.horizontal, fov.horizontal, n))
        el = np.radians(self.rng.uniform(-fov.vertical, fov.vertical, n))
        local = np.column_stack([r * np.cos(el) * np.sin(az), r * np.cos(el) * np.cos(az), r * np.sin(el)])
        return np.column_stack([local, self.rng.uniform(10, 120, n), self.rng.normal(0, 0.3, n)])

    def _clutter(self, rid):
        parts = []
        for src in self.sc.profile.clutter:
            n = self.rng.poisson(src.rate)
            if n:
                room = np.asarray(src.position) + self.rng.normal(0.0, 0.03, (n, 3))
                e = np.abs(self.rng.normal(src.energy, 10.0, n))
                parts.append(self._finish(rid, room, np.zeros((n, 3)), e))
        return np.concatenate(parts) if parts else np.zeros((0, 5))

    def _corrupt(self, raw: bytes) -> bytes:
        if self.rng.random() < 0.5:
            return raw[: int(self.rng.integers(1, len(raw)))]
        b = bytearray(raw)
        i = int(self.rng.integers(8, len(b)))
        b[i] ^= 1 << int(self.rng.integers(0, 8))
        return bytes(b)

    def run(self) -> SimOutput:
        sc, p = self.sc, self.sc.profile
        rids = sorted(self.poses)
        pkts = {r: [] for r in rids}
        wire = {r: bytearray() for r in rids}
        dropped = {r: 0 for r in rids}
        corrupted = {r: 0 for r in rids}
        counts = {r: np.zeros(sc.n_ticks, dtype=np.int64) for r in rids}
        truth: List[TruthRow] = []
        offsets = dict(zip(rids, p.timestamp_offsets_us * (len(rids) // len(p.timestamp_offsets_us) + 1)))
        for tick in range(sc.n_ticks):
            t = tick / FRAME_RATE
            present = [a for a in sc.actors if a.present(t)]
            for a in present:
                c, box, lab = actor_truth(a, t)
                truth.append(TruthRow(tick, tick * TICK_US, a.actor_id, *map(float, c), lab, tuple(map(float, box))))
            poses = {a.actor_id: self._pose(a, t) for a in present}
            for rid in rids:
                parts = []
                for a in present:
                    pose = poses[a.actor_id]
                    n = int(self.rng.poisson(p.moving_rate if pose.moving else p.stationary_rate))
                    room, vel, energy = self._body_points(a, t, rid, n, pose)
                    rows = self._finish(rid, room, vel, energy)
                    counts[rid][tick] += len(rows)
                    parts.append(rows)
                parts.append(self._clutter(rid))
                parts.append(self._ghosts(rid))
                pts = np.concatenate(parts) if parts else np.zeros((0, 5))
                ts = tick * TICK_US + offsets[rid] + int(self.rng.integers(0, p.timestamp_jitter_us + 1))
                pkt = FramePacket(rid, tick, ts, pts)
                pkts[rid].append(pkt)
                raw = encode(pkt)
                if self.rng.random() < p.drop:
                    dropped[rid] += 1
                    continue
                if self.rng.random() < p.corrupt:
                    corrupted[rid] += 1
                    raw = self._corrupt(raw)
                wire[rid] += raw
        return SimOutput(pkts, {r: bytes(b) for r, b in wire.items()}, truth, dropped, corrupted, counts)


def simulate(scenario: Scenario, out_dir=None) -> SimOutput:
    """Generate a scenario; with ``out_dir`` also write radar<k>.mmr, truth.csv and scenario.json."""
    out = Simulator(scenario).run()
    if out_dir is not None:
        write_outputs(scenario, out, out_dir)
    return out


TRUTH_FIELDS = ("tick", "timestamp_us", "actor", "x", "y", "z", "status", "xmin", "ymin", "xmax", "ymax")


def write_truth(path, rows: Sequence[TruthRow]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRUTH_FIELDS)
        for r in rows:
            w.writerow([r.tick, r.timestamp_us, r.actor, f"{r.x:.4f}", f"{r.y:.4f}", f"{r.z:.4f}", r.status.value,
                        *(f"{v:.4f}" for v in r.box)])


def write_outputs(scenario: Scenario, out: SimOutput, out_dir):
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for rid, data in out.streams.items():
        (d / f"radar{rid}.mmr").write_bytes(data)
    write_truth(d / "truth.csv", out.truth)
    meta = scenario_to_dict(scenario)
    meta["falls"] = [{"actor": a.actor_id, "contact_s": t} for a in scenario.actors for t in a.contact_times()]
    meta["dropped"] = {str(k): v for k, v in out.dropped.items()}
    meta["corrupted"] = {str(k): v for k, v in out.corrupted.items()}
    (d / "scenario.json").write_text(json.dumps(meta, indent=2, default=_json_default), encoding="utf-8")


def _json_default(v):
    if isinstance(v, float) and math.isinf(v):
        return None
    raise TypeError(type(v))


def recording_files(directory) -> Dict[int, Path]:
    """``{radar_id: path}`` for every radar<k>.mmr in a directory."""
    d = Path(directory)
    out = {}
    for p in sorted(d.glob("radar*.mmr")):
        try:
            out[int(p.stem[5:])] = p
        except ValueError:
            continue
    if not out:
        raise FileNotFoundError(f"no radar<k>.mmr files in {d}")
    return out


# replay --------------------------------------------------------------------------

def _produce(rid, path, feed: PacketFeed, speed, t0_wall, t0_us, chunk=1 << 16):
    dec = PacketDecoder()
    try:
        with open(path, "rb") as fh:
            while True:
                data = fh.read(chunk)
                outcomes = dec.feed(data) if data else dec.flush()
                for o in outcomes:
                    if not isinstance(o, GoodPacket):
                        feed.bad(rid, o)
                        continue
                    if math.isfinite(speed):
                        due = t0_wall + (o.packet.timestamp_us - t0_us) / 1e6 / speed
                        delay = due - time.monotonic()
                        if delay > 0:
                            time.sleep(delay)
                    feed.put(rid, o.packet)
                if not data:
                    break
    finally:
        feed.close(rid)


def _first_timestamp(path):
    dec = PacketDecoder()
    with open(path, "rb") as fh:
        while True:
            data = fh.read(4096)
            outcomes = dec.feed(data) if data else dec.flush()
            for o in outcomes:
                if isinstance(o, GoodPacket):
                    return o.packet.timestamp_us
            if not data:
                return None


def stream(files, speed=math.inf, capacity=64, grace_s=0.5) -> PacketFeed:
    """Replay recordings into a PacketFeed from one producer thread per radar.

    ``speed`` scales real time (1.0 keeps the recorded gaps); ``inf`` replays
    as fast as the consumer takes packets.
    """
    if not isinstance(files, dict):
        files = recording_files(files)
    for p in files.values():
        if not Path(p).exists():
            raise FileNotFoundError(p)
    paced = math.isfinite(speed)
    if paced and speed <= 0:
        raise ValueError("speed must be positive")
    feed = PacketFeed(sorted(files), capacity=capacity, block=True, grace_s=grace_s if paced else None)
    firsts = [t for t in (_first_timestamp(p) for p in files.values()) if t is not None]
    t0_us = min(firsts) if firsts else 0
    t0_wall = time.monotonic()
    feed.threads = []
    for rid, path in sorted(files.items()):
        th = threading.Thread(target=_produce, args=(rid, path, feed, speed, t0_wall, t0_us),
                              name=f"replay-r{rid}", daemon=True)
        th.start()
        feed.threads.append(th)
    return feed


def posture_scatter(kind: str, rng: np.random.Generator, n=300, centre=(0.0, 2.0)):
    """Accumulated post-fall scatter for one of the three posture templates."""
    cx, cy = centre
    heading = rng.uniform(0, math.pi)
    if kind == "lying_face_up":
        length, width, z, zsd = rng.uniform(1.55, 1.85), rng.uniform(0.45, 0.6), 0.25, 0.06
    elif kind == "lying_sideways":
        length, width, z, zsd = rng.uniform(1.5, 1.8), rng.uniform(0.25, 0.35), 0.5, 0.08
    elif kind == "sitting_on_ground":
        length, width, z, zsd = rng.uniform(0.45, 0.6), rng.uniform(0.45, 0.6), 1.0, 0.1
    else:
        raise ValueError(f"unknown posture template {kind!r}")
    u = rng.uniform(-length / 2, length / 2, n)
    v = rng.uniform(-width / 2, width / 2, n)
    zz = np.clip(rng.normal(z, zsd, n), 0.02, None)
    c, s = math.cos(heading), math.sin(heading)
    return np.column_stack([cx + c * u - s * v, cy + s * u + c * v, zz])
