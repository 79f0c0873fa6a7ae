"""Boundary/energy/speed gating and the static-clutter feedback loop."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .config import BackgroundParams, RoomBounds


@dataclass(frozen=True)
class BesThresholds:
    room: RoomBounds = RoomBounds()
    min_energy: float = 30.0
    speed_band: tuple = (0.0, 8.0)

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.room, cfg.background.min_energy, tuple(cfg.background.speed_band))


def bes_mask(points: np.ndarray, th: BesThresholds) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 5)
    speed = np.abs(pts[:, 4])
    return (th.room.contains(pts[:, :3])
            & (pts[:, 3] >= th.min_energy)
            & (speed >= th.speed_band[0]) & (speed <= th.speed_band[1]))


def bes_filter(points: np.ndarray, th: BesThresholds) -> Tuple[np.ndarray, np.ndarray]:
    """Split points into (kept, rejected); together they are exactly the input."""
    pts = np.asarray(points, dtype=float).reshape(-1, 5)
    m = bes_mask(pts, th)
    return pts[m], pts[~m]


@dataclass
class _Voxel:
    seen: deque = field(default_factory=deque)  # ticks seen, within the persistence window
    counter: int = 0
    last_seen: int = -1
    flagged: bool = False


class BackgroundGrid:
    """Voxel persistence map of points that keep turning up as noise.

    A voxel counts one hit per tick in which any noise point falls inside
    it. The counter is the number of hits over the trailing
    ``window_ticks``; once it reaches ``threshold`` the voxel is flagged and
    its counter is held until the voxel has been unseen for ``decay_ticks``,
    at which point it resets to zero and the flag clears.
    """

    def __init__(self, voxel=0.2, window_ticks=300, threshold=270, decay_ticks=1200):
        self.voxel = float(voxel)
        self.window_ticks = int(window_ticks)
        self.threshold = int(threshold)
        self.decay_ticks = int(decay_ticks)
        self.cells: Dict[tuple, _Voxel] = {}
        self._flagged: set = set()
        self.tick = -1

    @classmethod
    def from_params(cls, p: BackgroundParams, fps=20.0):
        window = max(1, int(round(p.persistence_s * fps)))
        return cls(p.voxel, window, max(1, int(math.ceil(p.persistence_fraction * window))),
                   max(1, int(round(p.decay_s * fps))))

    def keys(self, points) -> np.ndarray:
        return np.floor(np.asarray(points, dtype=float)[:, :3] / self.voxel).astype(np.int64)

    def update(self, tick: int, *point_sets) -> "BackgroundGrid":
        self.tick = tick
        arrays = [np.asarray(p, dtype=float)[:, :3] for p in point_sets if np.size(p)]
        if arrays:
            keys = np.unique(self.keys(np.concatenate(arrays)), axis=0)
            for key in map(tuple, keys.tolist()):
                cell = self.cells.pop(key, None)
                if cell is None:
                    cell = _Voxel()
                self.cells[key] = cell  # most recently seen last
                if cell.last_seen == tick:
                    continue
                cell.last_seen = tick
                if not cell.flagged:
                    cell.seen.append(tick)
                    self._trim(cell, tick)
                    if cell.counter >= self.threshold:
                        cell.flagged = True
                        self._flagged.add(key)
        self._decay(tick)
        return self

    def _trim(self, cell, tick):
        while cell.seen and cell.seen[0] <= tick - self.window_ticks:
            cell.seen.popleft()
        cell.counter = len(cell.seen)

    def _decay(self, tick):
        # cells are ordered by last_seen, so stale ones sit at the front
        while self.cells:
            key = next(iter(self.cells))
            if tick - self.cells[key].last_seen < self.decay_ticks:
                break
            del self.cells[key]
            self._flagged.discard(key)

    def flagged_mask(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if not self._flagged or pts.size == 0:
            return np.zeros(len(pts), dtype=bool)
        keys = self.keys(pts)
        return np.fromiter((tuple(k) in self._flagged for k in keys.tolist()), dtype=bool, count=len(keys))

    def subtract(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """(survivors, removed) preserving input order."""
        pts = np.asarray(points, dtype=float)
        m = self.flagged_mask(pts)
        return pts[~m], pts[m]

    @property
    def flagged(self):
        return frozenset(self._flagged)

    def export(self):
        """Voxel records ``(i, j, k, counter, flagged)`` for plotting."""
        for c in self.cells.values():
            if not c.flagged:
                self._trim(c, self.tick)
        return [(*k, c.counter, c.flagged) for k, c in sorted(self.cells.items())]


def update_background(grid: BackgroundGrid, rejected_points, dbscan_noise, tick) -> BackgroundGrid:
    return grid.update(tick, rejected_points, dbscan_noise)


def subtract_background(grid: BackgroundGrid, points) -> np.ndarray:
    return grid.subtract(points)[0]
