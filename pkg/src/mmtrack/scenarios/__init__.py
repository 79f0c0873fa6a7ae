"""Bundled scenarios: two JSON files plus seeded generators.

Names accepted by :func:`get`:

``one_actor``, ``three_actors``
    the JSON files shipped next to this module
``empty_room``
    two minutes with nobody in the room
``late_entry``
    an empty room until an actor walks in at 40 s
``fall-<k>`` / ``no_fall-<k>``
    seeded single-actor scenes with or without a fall
``sync_trace``
    ten minutes, three walkers, 5 % packet drop and 2 % corruption
"""
from __future__ import annotations

import json
import math
from importlib import resources
from typing import Optional

import numpy as np

from ..errors import ScriptError
from ..simulator import ActorScript, Scenario, SimProfile, StatusChange, scenario_from_dict
from ..config import StatusLabel

BUNDLED = ("one_actor", "three_actors")


def _bundled(name, seed):
    text = resources.files(__name__).joinpath(f"{name}.json").read_text(encoding="utf-8")
    return scenario_from_dict(json.loads(text), seed)


def _walk(rng, start, n_legs, speed, t0=0.0, box=((-1.8, 1.0), (1.0, 3.6))):
    """Waypoints for a wander of ``n_legs`` straight legs at ``speed``."""
    t, (x, y) = t0, start
    pts = [(t, x, y)]
    for _ in range(n_legs):
        while True:
            nx, ny = rng.uniform(*box[0]), rng.uniform(*box[1])
            d = math.hypot(nx - x, ny - y)
            if d > 0.8:
                break
        t += d / speed
        x, y = nx, ny
        pts.append((round(t, 3), round(x, 3), round(y, 3)))
    return pts


def fall_scenario(k: int, fall=True) -> Scenario:
    rng = np.random.default_rng(10_000 + k)
    start = (rng.uniform(-1.5, 0.8), rng.uniform(1.4, 3.2))
    walk = _walk(rng, start, 2, rng.uniform(0.35, 0.55), box=((-1.6, 0.9), (1.3, 3.3)))
    t_stop = walk[-1][0]
    t_event = round(t_stop + rng.uniform(1.0, 3.0), 2)
    duration = round(t_event + 12.0, 1)
    if fall:
        timeline = [StatusChange(t_event, StatusLabel.FALLEN, round(rng.uniform(0.6, 1.5), 2))]
    else:
        # sit down, stay, stand up: the usual confuser for a fall detector
        timeline = [StatusChange(t_event, StatusLabel.SITTING),
                    StatusChange(round(t_event + 6.0, 2), StatusLabel.STANDING)]
    walk.append((duration, walk[-1][1], walk[-1][2]))
    actor = ActorScript(1, walk, timeline)
    name = f"{'fall' if fall else 'no_fall'}-{k}"
    return Scenario([actor], duration, seed=k, name=name).validate()


def empty_room(seed=0, duration=120.0) -> Scenario:
    return Scenario([], duration, seed=seed, name="empty_room").validate()


def late_entry(seed=0) -> Scenario:
    a = ActorScript(1, [(40.0, -0.5, 3.4), (50.0, -0.5, 1.4), (60.0, -0.5, 1.4)], appear=40.0)
    return Scenario([a], 60.0, seed=seed, name="late_entry").validate()


def sync_trace(seed=0, minutes=10.0) -> Scenario:
    rng = np.random.default_rng(seed)
    duration = minutes * 60.0
    actors = []
    for i in range(3):
        pts = _walk(rng, (rng.uniform(-1.5, 0.8), rng.uniform(1.2, 3.4)), 400, 0.5)
        pts = [p for p in pts if p[0] < duration] + [(duration + 1.0, pts[-1][1], pts[-1][2])]
        actors.append(ActorScript(i + 1, pts))
    prof = SimProfile(drop=0.05, corrupt=0.02)
    return Scenario(actors, duration, seed=seed, profile=prof, name="sync_trace").validate()


def get(name: str, seed: Optional[int] = None) -> Scenario:
    if name in BUNDLED:
        return _bundled(name, seed)
    s = 0 if seed is None else seed
    if name == "empty_room":
        return empty_room(s)
    if name == "late_entry":
        return late_entry(s)
    if name == "sync_trace":
        return sync_trace(s)
    for prefix, fall in (("fall-", True), ("no_fall-", False)):
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            sc = fall_scenario(int(name[len(prefix):]), fall)
            if seed is not None:
                sc.seed = seed
            return sc
    raise ScriptError("scenario", f"unknown scenario {name!r}")
