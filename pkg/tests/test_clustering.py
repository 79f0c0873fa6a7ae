import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mmtrack.clustering import dbscan_labels, dynamic_dbscan, partition, summarize
from mmtrack.config import DEFAULT_BANDS, EnergyBand
from mmtrack.errors import EmptyError

from oracles import oracle_partition, random_frame, textbook_dbscan

SINGLE = (EnergyBand(0.0, math.inf, 0.5, 10),)


def test_stationary_target_fixture():
    pts = np.array([[0.0, 2.0, 1.0, 350.0, 0.0], [0.8, 2.0, 1.0, 350.0, 0.0], [1.6, 2.0, 1.0, 350.0, 0.0]])
    clusters, noise = dynamic_dbscan(pts, DEFAULT_BANDS)
    assert len(clusters) == 1 and clusters[0].count == 3 and len(noise) == 0
    clusters, noise = dynamic_dbscan(pts, SINGLE)
    assert clusters == [] and list(noise) == [0, 1, 2]


def test_empty_frame():
    clusters, noise = dynamic_dbscan(np.zeros((0, 5)))
    assert clusters == [] and len(noise) == 0


def test_matches_oracle(rng):
    for _ in range(300):
        pts = random_frame(rng)
        clusters, noise = dynamic_dbscan(pts, DEFAULT_BANDS)
        assert partition(clusters) == oracle_partition(pts, DEFAULT_BANDS)
        members = {i for c in clusters for i in c.indices}
        assert set(noise) == set(range(len(pts))) - members


def test_dbscan_labels_oracle_on_ties():
    # lattice points produce exact distance ties for border points
    g = np.array([[x, y, 0.0] for x in range(5) for y in range(3)], dtype=float) * 0.5
    for eps, mp in ((0.5, 5), (0.5, 4), (0.71, 6), (1.0, 3)):
        got = dbscan_labels(g, eps, mp)
        want = textbook_dbscan(g, eps, mp)
        assert _as_partition(got) == _as_partition(want)


def _as_partition(labels):
    out = {}
    for i, l in enumerate(labels):
        if l >= 0:
            out.setdefault(l, set()).add(i)
    return frozenset(frozenset(v) for v in out.values())


def test_band_skip_identity(rng):
    for _ in range(200):
        pts = random_frame(rng)
        a, na = dynamic_dbscan(pts, DEFAULT_BANDS, skip_empty=True)
        b, nb = dynamic_dbscan(pts, DEFAULT_BANDS, skip_empty=False)
        assert partition(a) == partition(b) and np.array_equal(na, nb)


def test_order_invariance(rng):
    for _ in range(100):
        pts = random_frame(rng)
        perm = rng.permutation(len(pts))
        a, _ = dynamic_dbscan(pts)
        b, _ = dynamic_dbscan(pts[perm])
        assert partition(a) == frozenset(frozenset(int(perm[i]) for i in c) for c in partition(b))


frames = st.lists(st.tuples(st.floats(-2, 1.5), st.floats(0, 4), st.floats(0, 2), st.floats(0, 600)),
                  max_size=60)


@settings(max_examples=150, deadline=None)
@given(frames)
def test_passes_only_add_membership(rows):
    pts = np.array([(*r, 0.0) for r in rows], dtype=float).reshape(-1, 5)
    clusters, _ = dynamic_dbscan(pts)
    members = {int(i) for c in clusters for i in c.indices}
    low, _ = dynamic_dbscan(pts, SINGLE)
    assert {int(i) for c in low for i in c.indices} <= members


def test_summarize():
    c = summarize(np.array([[1.0, 2.0, 3.0, 50.0, 0.0]]))
    assert np.array_equal(c.centroid, [1, 2, 3]) and np.array_equal(c.extents, [0, 0, 0])
    assert np.allclose(summarize(np.array([[0.0, 0, 0], [2.0, 0, 0]])).centroid, [1, 0, 0])
    with pytest.raises(EmptyError):
        summarize(np.zeros((0, 5)))


def test_summarize_arithmetic(rng):
    pts = rng.normal(size=(50, 5))
    c = summarize(pts)
    for ax in range(3):
        col = [p[ax] for p in pts]
        assert c.centroid[ax] == pytest.approx(sum(col) / 50)
        assert c.box_min[ax] == min(col) and c.box_max[ax] == max(col)
    assert c.mean_energy == pytest.approx(sum(p[3] for p in pts) / 50)


def test_cluster_count_floor(rng):
    for _ in range(100):
        pts = random_frame(rng)
        for c in dynamic_dbscan(pts)[0]:
            assert c.count >= min(b.min_pts for b in DEFAULT_BANDS)
