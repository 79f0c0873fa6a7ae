"""Probability-matrix association of clusters to per-target bins."""
from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .clustering import Cluster
from .config import TrackingParams
from .errors import HistoryError


class TrackState(str, enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"


@dataclass
class TrackBin:
    track_id: int
    history: int = 20
    state: TrackState = TrackState.TENTATIVE
    clusters: deque = None
    ticks: deque = None  # tick of each stored cluster
    trajectory: list = field(default_factory=list)  # (tick, timestamp_us, centroid)
    hits: int = 0  # consecutive assigned ticks
    misses: int = 0  # consecutive unassigned ticks
    last_tick: int = -1
    last_us: int = -1
    status_window: object = None
    status: object = None  # blurred StatusLabel

    def __post_init__(self):
        self.clusters = deque(maxlen=self.history)
        self.ticks = deque(maxlen=self.history)

    @property
    def last(self) -> Cluster:
        if not self.clusters:
            raise HistoryError(f"track {self.track_id} has no stored clusters")
        return self.clusters[-1]

    @property
    def active(self):
        return self.state != TrackState.LOST

    def add(self, cluster: Cluster, tick: int, ts_us: int):
        if self.ticks and tick <= self.ticks[-1]:
            raise ValueError("trajectory ticks must increase")
        self.clusters.append(cluster)
        self.ticks.append(tick)
        self.trajectory.append((tick, ts_us, cluster.centroid.copy()))
        self.last_tick, self.last_us = tick, ts_us

    def _rates(self, values):
        """Per-tick changes between stored clusters: (mean, std) per axis."""
        if len(values) < 2:
            return np.zeros(3), np.zeros(3)
        v = np.asarray(values)
        t = np.asarray(self.ticks, dtype=float)
        step = np.diff(v, axis=0) / np.diff(t)[:, None]
        return step.mean(axis=0), step.std(axis=0)

    def motion_stats(self):
        return self._rates([c.centroid for c in self.clusters])

    def shape_stats(self):
        return self._rates([c.extents for c in self.clusters])


@dataclass(frozen=True)
class ScoreParts:
    c_pos: float
    c_shape: float
    e_pos: float
    e_shape: float
    z_pos: float
    z_shape: float
    gated: bool

    def total(self, coeffs):
        if self.gated:
            return 0.0
        a, b, g, d = coeffs
        return a * self.c_pos + b * self.c_shape + g * self.e_pos + d * self.e_shape


def expectation_scores(cluster: Cluster, params: TrackingParams):
    return params.centroid_z(cluster.centroid[2]), params.box_height(cluster.extents[2])


def _zscore(delta, mean, std, floor, gap):
    s = np.maximum(std, floor) * gap
    return float(np.max(np.abs(delta - mean * gap) / s))


def score_parts(bin: TrackBin, cluster: Cluster, params: TrackingParams, tick: Optional[int] = None) -> ScoreParts:
    last = bin.last
    gap = max(1, (tick if tick is not None else bin.last_tick + 1) - bin.last_tick)
    mu, sd = bin.motion_stats()
    z_pos = _zscore(cluster.centroid - last.centroid, mu, sd, params.min_std_pos, gap)
    mu_s, sd_s = bin.shape_stats()
    z_shape = _zscore(cluster.extents - last.extents, mu_s, sd_s, params.min_std_shape, gap)
    e_pos, e_shape = expectation_scores(cluster, params)
    cut = params.z_cut
    return ScoreParts(max(0.0, 1 - z_pos / cut), max(0.0, 1 - z_shape / cut), e_pos, e_shape,
                      z_pos, z_shape, z_pos > cut or z_shape > cut)


def score(bin: TrackBin, cluster: Cluster, coeffs=(0.3, 0.3, 0.2, 0.2),
          params: TrackingParams = TrackingParams(), tick=None) -> float:
    return score_parts(bin, cluster, params, tick).total(coeffs)


def birth_score(cluster: Cluster, params: TrackingParams) -> float:
    """Expectation-only score used to decide whether a stray cluster starts a track."""
    _, _, g, d = params.coefficients
    e_pos, e_shape = expectation_scores(cluster, params)
    return (g * e_pos + d * e_shape) / (g + d) if g + d > 0 else 0.0


def probability_matrix(bins: Sequence[TrackBin], clusters: Sequence[Cluster],
                       params: TrackingParams, tick=None) -> np.ndarray:
    m = np.zeros((len(bins), len(clusters)))
    for r, b in enumerate(bins):
        for c, cl in enumerate(clusters):
            m[r, c] = score(b, cl, params.coefficients, params, tick)
    return m


@dataclass
class Assignment:
    pairs: Dict[int, int]  # row -> column
    absorbed: Dict[int, int]  # neighbour column -> row it was folded into
    free_rows: List[int]
    free_cols: List[int]


def neighbor_graph(centroids, radius=0.5) -> np.ndarray:
    c = np.asarray(centroids, dtype=float).reshape(len(centroids), -1) if len(centroids) else np.zeros((0, 3))
    return np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1) <= radius


def assign(matrix, centroids=None, neighbor_radius=0.5, neighbors=None) -> Assignment:
    """Greedy global-maximum assignment.

    Pick the largest remaining entry, give that column to that row, then drop
    the row, the column and every neighbouring column: centroid within
    ``neighbor_radius``, or as given by the boolean ``neighbors`` matrix.
    Stops when no positive entry is left. Rows are expected in ascending
    track-id order; ties resolve to the lowest row, then the lowest column.
    """
    m = np.array(matrix, dtype=float, copy=True)
    n_rows, n_cols = m.shape
    if neighbors is None:
        neighbors = neighbor_graph(centroids if centroids is not None else np.zeros((n_cols, 3)), neighbor_radius)
    nb = np.asarray(neighbors, dtype=bool)
    pairs, absorbed = {}, {}
    while m.size and m.max() > 0:
        r, c = np.unravel_index(np.argmax(m), m.shape)
        r, c = int(r), int(c)
        pairs[r] = c
        near = np.flatnonzero(nb[c])
        for k in near:
            k = int(k)
            if k != c and k not in pairs.values() and k not in absorbed:
                absorbed[k] = r
        m[r, :] = 0.0
        m[:, near] = 0.0
        m[:, c] = 0.0
    taken = set(pairs.values()) | set(absorbed)
    return Assignment(pairs, absorbed,
                      [r for r in range(n_rows) if r not in pairs],
                      [c for c in range(n_cols) if c not in taken])


@dataclass
class TrackUpdate:
    assigned: list  # (TrackBin, Cluster)
    born: list
    lost: list
    matrix: np.ndarray


class Tracker:
    """Holds the bins and runs association plus lifecycle once per tick."""

    def __init__(self, params: TrackingParams = TrackingParams()):
        self.params = params
        self.bins: List[TrackBin] = []
        self.retired: List[TrackBin] = []
        self._ids = itertools.count(1)

    @property
    def confirmed(self):
        return [b for b in self.bins if b.state == TrackState.CONFIRMED]

    def step(self, clusters: Sequence[Cluster], tick: int, ts_us: int) -> TrackUpdate:
        p = self.params
        bins = sorted(self.bins, key=lambda b: b.track_id)
        matrix = probability_matrix(bins, clusters, p, tick)
        result = assign(matrix, [c.centroid for c in clusters], p.neighbor_radius)
        assigned = []
        for r, c in result.pairs.items():
            b = bins[r]
            b.add(clusters[c], tick, ts_us)
            b.hits += 1
            b.misses = 0
            if b.state == TrackState.TENTATIVE and b.hits >= p.confirm_hits:
                b.state = TrackState.CONFIRMED
            assigned.append((b, clusters[c]))
        lost = []
        won = [clusters[c].centroid for c in result.pairs.values()]
        for r in result.free_rows:
            b = bins[r]
            if any(np.linalg.norm(b.last.centroid - w) <= p.neighbor_radius for w in won):
                # another bin took the cluster this one was following: same person
                lost.append(b)
                continue
            b.misses += 1
            if b.state == TrackState.TENTATIVE:
                b.hits = 0
                if b.misses >= p.tentative_miss_limit:
                    lost.append(b)
            elif (ts_us - b.last_us) >= p.timeout_s * 1e6:
                lost.append(b)
        for b in lost:
            b.state = TrackState.LOST
            self.bins.remove(b)
            self.retired.append(b)
        born = []
        occupied = [b.last.centroid for b in self.bins]
        for c in result.free_cols:
            cl = clusters[c]
            if birth_score(cl, p) <= p.birth_threshold:
                continue
            if any(np.linalg.norm(cl.centroid - o) <= p.neighbor_radius for o in occupied):
                continue
            b = TrackBin(next(self._ids), history=p.history)
            b.add(cl, tick, ts_us)
            b.hits = 1
            if b.hits >= p.confirm_hits:
                b.state = TrackState.CONFIRMED
            self.bins.append(b)
            occupied.append(cl.centroid)
            born.append(b)
            assigned.append((b, cl))
        return TrackUpdate(assigned, born, lost, matrix)
