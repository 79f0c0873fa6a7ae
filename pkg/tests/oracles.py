"""Independent reference implementations shared by the unit tests and the acceptance suite.

Each one is written for clarity over speed and shares no code with the package.
"""
import math
from collections import defaultdict

import numpy as np
from mmtrack.config import STATUS_ORDER

TICK_US = 50_000


def _matmul(a, b):
    """Plain triple loop, independent of numpy's matmul."""
    n, m, k = len(a), len(b[0]), len(b)
    return [[sum(a[i][t] * b[t][j] for t in range(k)) for j in range(m)] for i in range(n)]


def transform_oracle(position, rotation_deg):
    a, b, g = (math.radians(v) for v in rotation_deg)
    rx = [[1, 0, 0, 0], [0, math.cos(a), -math.sin(a), 0], [0, math.sin(a), math.cos(a), 0], [0, 0, 0, 1]]
    ry = [[math.cos(b), 0, math.sin(b), 0], [0, 1, 0, 0], [-math.sin(b), 0, math.cos(b), 0], [0, 0, 0, 1]]
    rz = [[math.cos(g), -math.sin(g), 0, 0], [math.sin(g), math.cos(g), 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
    tr = [[1, 0, 0, position[0]], [0, 1, 0, position[1]], [0, 0, 1, position[2]], [0, 0, 0, 1]]
    # x rotation acts first on a column point, the offset last
    return np.array(_matmul(tr, _matmul(rz, _matmul(ry, rx))))


def textbook_dbscan(xyz, eps, min_pts):
    """Full distance matrix, BFS over core points; borders go to their nearest core."""
    n = len(xyz)
    d = np.sqrt(((xyz[:, None, :] - xyz[None, :, :]) ** 2).sum(-1)) if n else np.zeros((0, 0))
    nb = d <= eps
    core = nb.sum(1) >= min_pts
    labels = [-1] * n
    lab = 0
    for i in range(n):
        if not core[i] or labels[i] >= 0:
            continue
        labels[i] = lab
        todo = [i]
        while todo:
            j = todo.pop()
            for k in np.flatnonzero(nb[j] & core):
                if labels[k] < 0:
                    labels[k] = lab
                    todo.append(k)
        lab += 1
    for i in range(n):
        if core[i]:
            continue
        cand = [j for j in range(n) if core[j] and nb[i, j]]
        if cand:
            best = min(cand, key=lambda j: (d[i, j], tuple(xyz[j])))
            labels[i] = labels[best]
    return labels


def oracle_partition(pts, bands):
    n = len(pts)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    member = set()
    for band in sorted(bands, key=lambda b: -b.low):
        idx = [i for i in range(n) if pts[i, 3] >= band.low]
        if not idx:
            continue
        labels = textbook_dbscan(pts[idx, :3], band.eps, band.min_pts)
        groups = {}
        for i, l in zip(idx, labels):
            if l >= 0:
                groups.setdefault(l, []).append(i)
        for g in groups.values():
            if not any(band.low <= pts[i, 3] < band.high for i in g):
                continue  # made only of higher-energy points: belongs to an earlier pass
            member.update(g)
            for i in g[1:]:
                parent[find(i)] = find(g[0])
    comps = {}
    for i in member:
        comps.setdefault(find(i), set()).add(i)
    return frozenset(frozenset(c) for c in comps.values())


def random_frame(rng, n=None):
    n = int(rng.integers(0, 61)) if n is None else n
    k = int(rng.integers(1, 4))
    centres = rng.uniform([-2, 0, 0], [1.5, 4, 1.8], (k, 3))
    xyz = centres[rng.integers(0, k, n)] + rng.normal(0, rng.uniform(0.1, 0.6), (n, 3))
    energy = rng.choice([rng.uniform(0, 200), rng.uniform(200, 300), rng.uniform(300, 400), rng.uniform(400, 600)],
                        size=n) if n else np.zeros(0)
    energy = rng.uniform(0, 600, n) if rng.random() < 0.5 else energy
    return np.column_stack([xyz, energy, np.zeros(n)])


def greedy_oracle(matrix, nb):
    """The procedure transcribed onto Python lists, scanning row-major for the first strict maximum."""
    rows, cols = np.shape(matrix)
    m = [list(map(float, row)) for row in matrix]
    pairs, removed = {}, set()
    while True:
        best, at = 0.0, None
        for r in range(rows):
            for c in range(cols):
                if m[r][c] > best:
                    best, at = m[r][c], (r, c)
        if at is None:
            break
        r, c = at
        pairs[r] = c
        gone = {c} | {k for k in range(cols) if nb[c][k]}
        removed |= gone
        for k in range(cols):
            m[r][k] = 0.0
        for rr in range(rows):
            for k in gone:
                m[rr][k] = 0.0
    return pairs, [c for c in range(cols) if c not in removed], [r for r in range(rows) if r not in pairs]


def blur_oracle(labels, length):
    """Count the window afresh at every step; ties keep the previous output."""
    out, prev = [], None
    for i in range(len(labels)):
        win = labels[max(0, i - length + 1):i + 1]
        counts = {lab: win.count(lab) for lab in STATUS_ORDER}
        top = max(counts.values())
        tied = [lab for lab in STATUS_ORDER if counts[lab] == top]
        prev = prev if prev in tied else tied[0]
        out.append(prev)
    return out


def sync_membership_oracle(arrivals, w=TICK_US):
    """Window membership from the full timeline: a packet is late iff an earlier arrival sits in a later window."""
    member, hi = defaultdict(set), None
    for p in arrivals:
        k = p.timestamp_us // w
        if hi is not None and k < hi:
            continue
        hi = k if hi is None else max(hi, k)
        member[k].add((p.radar_id, p.seq))
    return member
