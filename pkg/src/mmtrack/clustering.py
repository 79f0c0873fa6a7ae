"""Energy-stratified multi-pass DBSCAN.

Bands are visited from the highest energy down. The pass for a band
clusters that band's points together with every higher-energy point, using
the band's own ``eps``/``min_pts``, and keeps the clusters that contain at
least one point of the band itself (clusters made only of higher-energy
points belong to an earlier pass). Empty bands therefore contribute nothing
and are skipped. Clusters from different passes that share a point are
merged; points left in no cluster are noise.

Core points follow the usual definition (``min_pts`` counts the point
itself). A border point reachable from several clusters joins the one of its
nearest core point, so the result does not depend on input order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .config import DEFAULT_BANDS, EnergyBand
from .errors import EmptyError


@dataclass(frozen=True, eq=False)
class Cluster:
    indices: np.ndarray  # into the clean frame
    centroid: np.ndarray
    box_min: np.ndarray
    box_max: np.ndarray
    mean_energy: float
    count: int

    @property
    def extents(self):
        return self.box_max - self.box_min

    @property
    def ground_box(self):
        """(xmin, ymin, xmax, ymax)."""
        return (self.box_min[0], self.box_min[1], self.box_max[0], self.box_max[1])


def summarize(points, indices=None) -> Cluster:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise EmptyError("cluster needs at least one member")
    idx = np.arange(len(pts)) if indices is None else np.asarray(indices)
    xyz = pts[:, :3]
    energy = float(pts[:, 3].mean()) if pts.shape[1] > 3 else 0.0
    return Cluster(idx, xyz.mean(axis=0), xyz.min(axis=0), xyz.max(axis=0), energy, len(pts))


@lru_cache(maxsize=64)
def _offsets(cell, eps):
    """Half of the integer cell offsets whose cells can hold points within ``eps``."""
    r = int(np.ceil(eps / cell)) + 1
    g = np.arange(-r, r + 1)
    off = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    gap = np.maximum(np.abs(off) - 1, 0) * cell
    off = off[np.sqrt((gap ** 2).sum(axis=1)) <= eps]
    # keep one of each +/- pair, drop zero
    first = np.array([next((v for v in o if v != 0), 0) for o in off])
    out = off[first > 0]
    out.setflags(write=False)
    return out


def _cell_codes(keys):
    lo = keys.min(axis=0) - 8
    span = keys.max(axis=0) - lo + 9
    return ((keys - lo) * np.array([span[1] * span[2], span[2], 1])).sum(axis=1), lo, span


def _min_dist_within(a, b, eps):
    if len(a) * len(b) <= 4096:
        d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        return bool(d.min() <= eps * eps)
    d, _ = cKDTree(b).query(a, k=1, distance_upper_bound=eps * (1 + 1e-9))
    return bool(np.any(d <= eps))


def _core_components(xyz, eps):
    """Connected components of the eps-graph over ``xyz`` (all core points)."""
    cell = eps / np.sqrt(3.0) * (1 - 1e-9)  # any two points sharing a cell are within eps
    keys = np.floor(xyz / cell).astype(np.int64)
    codes, lo, span = _cell_codes(keys)
    uniq, inv = np.unique(codes, return_inverse=True)
    m = len(uniq)
    order = np.argsort(inv, kind="stable")
    starts = np.searchsorted(inv[order], np.arange(m + 1))
    ckeys = keys[order[starts[:-1]]]
    # representative: the member nearest its cell's mean
    sums = np.zeros((m, 3))
    np.add.at(sums, inv, xyz)
    means = sums / np.diff(starts)[:, None]
    dist = ((xyz - means[inv]) ** 2).sum(axis=1)
    rep_order = np.lexsort((dist, inv))
    rep = xyz[rep_order[starts[:-1]]]
    mult = np.array([span[1] * span[2], span[2], 1])
    off = _offsets(cell, eps)
    target = (((ckeys - lo) * mult).sum(axis=1)[:, None] + (off * mult).sum(axis=1)[None, :]).ravel()
    j = np.minimum(np.searchsorted(uniq, target), m - 1)
    hit = np.flatnonzero(uniq[j] == target)
    pa, pb = hit // len(off), j[hit]
    sure = ((rep[pa] - rep[pb]) ** 2).sum(axis=1) <= eps * eps
    g = coo_matrix((np.ones(int(sure.sum())), (pa[sure], pb[sure])), shape=(m, m))
    _, comp = connected_components(g, directed=False)
    # exact check only where the representatives did not already settle it
    rest = np.flatnonzero(~sure & (comp[pa] != comp[pb]))
    if len(rest):
        parent = list(range(int(comp.max()) + 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a
        for k in rest:
            a, b = int(pa[k]), int(pb[k])
            ra, rb = find(comp[a]), find(comp[b])
            if ra != rb and _min_dist_within(xyz[order[starts[a]:starts[a + 1]]],
                                             xyz[order[starts[b]:starts[b + 1]]], eps):
                parent[max(ra, rb)] = min(ra, rb)
        comp = np.array([find(c) for c in comp])
    return comp[inv]


def dbscan_labels(xyz: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Cluster labels (-1 for noise) for one DBSCAN pass."""
    xyz = np.asarray(xyz, dtype=float)
    n = len(xyz)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    tree = cKDTree(xyz)
    # a cell of side eps/sqrt(3) holding min_pts points makes all of them core
    cell = eps / np.sqrt(3.0) * (1 - 1e-9)
    codes, _, _ = _cell_codes(np.floor(xyz / cell).astype(np.int64))
    _, inv, cnt = np.unique(codes, return_inverse=True, return_counts=True)
    core = cnt[inv] >= min_pts
    rest = np.flatnonzero(~core)
    if len(rest) and min_pts <= n:
        if min_pts == 1:
            core[rest] = True
        else:
            d, _ = tree.query(xyz[rest], k=min_pts, distance_upper_bound=eps * (1 + 1e-9))
            core[rest] = d[:, -1] <= eps
    if not core.any():
        return labels
    cidx = np.flatnonzero(core)
    labels[cidx] = _core_components(xyz[cidx], eps)

    # border points: nearest core point wins, ties broken by core coordinates
    border = np.flatnonzero(~core)
    if len(border):
        ctree = cKDTree(xyz[cidx])
        k = min(2, len(cidx))
        d, j = ctree.query(xyz[border], k=k, distance_upper_bound=eps * (1 + 1e-9))
        d, j = d.reshape(len(border), k), j.reshape(len(border), k)
        for b, dd, jj in zip(border, d, j):
            if not dd[0] <= eps:
                continue
            best = jj[0]
            if k > 1 and dd[1] == dd[0]:
                cand = ctree.query_ball_point(xyz[b], dd[0] * (1 + 1e-12))
                cand = [c for c in cand if np.linalg.norm(xyz[cidx[c]] - xyz[b]) == dd[0]]
                best = min(cand, key=lambda c: tuple(xyz[cidx[c]]))
            labels[b] = labels[cidx[best]]
    uniq, inv = np.unique(labels[labels >= 0], return_inverse=True)
    labels[labels >= 0] = inv
    return labels


def band_passes(energy: np.ndarray, bands: Sequence[EnergyBand], skip_empty=True):
    """Yield ``(band, candidate_mask, own_mask)`` from the top band down."""
    for band in sorted(bands, key=lambda b: b.low, reverse=True):
        own = band.contains(energy)
        if skip_empty and not own.any():
            continue
        yield band, energy >= band.low, own


def dynamic_dbscan(points, bands: Sequence[EnergyBand] = DEFAULT_BANDS,
                   skip_empty=True) -> Tuple[List[Cluster], np.ndarray]:
    """Cluster a clean frame. Returns (clusters, noise indices)."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        return [], np.zeros(0, dtype=np.int64)
    xyz, energy = pts[:, :3], pts[:, 3]
    member = np.zeros(n, dtype=bool)
    src, dst = [], []
    for band, cand, own in band_passes(energy, bands, skip_empty):
        idx = np.flatnonzero(cand)
        labels = dbscan_labels(xyz[idx], band.eps, band.min_pts)
        if labels.max(initial=-1) < 0:
            continue
        keep = np.zeros(labels.max() + 1, dtype=bool)
        keep[labels[own[idx] & (labels >= 0)]] = True
        sel = (labels >= 0) & keep[np.maximum(labels, 0)]
        if not sel.any():
            continue
        nodes, labs = idx[sel], labels[sel]
        order = np.argsort(labs, kind="stable")
        nodes, labs = nodes[order], labs[order]
        # chain the members of each kept cluster together
        same = labs[1:] == labs[:-1]
        src.append(nodes[:-1][same])
        dst.append(nodes[1:][same])
        member[nodes] = True
    if not member.any():
        return [], np.arange(n)
    src = np.concatenate(src) if src else np.zeros(0, int)
    dst = np.concatenate(dst) if dst else np.zeros(0, int)
    graph = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    clustered = np.flatnonzero(member)
    order = clustered[np.argsort(comp[clustered], kind="stable")]
    cuts = np.flatnonzero(np.diff(comp[order])) + 1
    clusters = [summarize(pts[g], g) for g in np.split(order, cuts)]
    # deterministic order: by centroid x, then y, then z
    clusters.sort(key=lambda c: tuple(np.round(c.centroid, 9)))
    return clusters, np.flatnonzero(~member)


def partition(clusters) -> frozenset:
    """Order-free view of a clustering, for comparisons."""
    return frozenset(frozenset(int(i) for i in c.indices) for c in clusters)
