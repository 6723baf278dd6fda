import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radimpute.clustering import elbow_index, elkm, kmeans, tac, wcss
from radimpute.geometry import MultiPolygon, convex_hull, entity_exist, rectangle


def blobs(centers, n=20, spread=0.05, seed=0):
    rng = np.random.default_rng(seed)
    pts = np.vstack([c + rng.normal(0, spread, size=(n, 2)) for c in centers])
    return pts, np.repeat(np.arange(len(centers)), n)


def same_partition(a, b):
    return len(set(zip(a.tolist(), b.tolist()))) == len(set(a.tolist())) == len(set(b.tolist()))


def test_two_blobs_recovered():
    X, truth = blobs([(0, 0), (10, 10)])
    assert same_partition(kmeans(X, 2, seed=1).assignments, truth)


def test_k_extremes():
    X, _ = blobs([(0, 0)], n=7)
    one = kmeans(X, 1)
    assert one.n_clusters == 1
    np.testing.assert_allclose(one.centers[0], X.mean(axis=0))
    assert sorted(kmeans(X, 7).assignments.tolist()) == list(range(7))
    for k in (0, 8):
        with pytest.raises(ValueError):
            kmeans(X, k)


def test_kmeans_bit_reproducible():
    X = np.random.default_rng(3).random((60, 4))
    a, b = kmeans(X, 5, seed=9), kmeans(X, 5, seed=9)
    assert np.array_equal(a.assignments, b.assignments) and np.array_equal(a.centers, b.centers)


def test_wcss_by_hand():
    X = np.array([[0.0, 0], [2, 0], [10, 0]])
    from radimpute.differentiator import Clustering
    assert wcss(X, Clustering(np.array([0, 0, 1]))) == pytest.approx(2.0)


def test_elkm_finds_three_blobs():
    X, truth = blobs([(0, 0), (8, 0), (4, 7)])
    cl = elkm(X, 8, seed=2)
    assert cl.n_clusters == 3 and same_partition(cl.assignments, truth)


def test_elkm_bounds():
    X, _ = blobs([(0, 0), (5, 5)], n=5)
    assert elkm(X, 2).n_clusters in (1, 2)
    with pytest.raises(ValueError):
        elkm(X, 1)


def test_elbow_ties_and_flat_curve():
    assert elbow_index([5, 5, 5, 5]) == 0
    assert elbow_index([10, 2, 1, 0]) == 1
    # symmetric curve: both interior points are equally far, smallest wins
    assert elbow_index([3, 0, 0, 3]) == 1


def test_tac_wall_keeps_points_apart():
    walls = MultiPolygon([rectangle(0.9, -1, 1.1, 1)])
    cl = tac(np.zeros((2, 1)), np.array([(0.0, 0.0), (2.0, 0.0)]), walls)
    assert cl.n_clusters == 2


def test_tac_open_room_is_one_cluster():
    locs = np.random.default_rng(0).uniform(0, 10, size=(30, 2))
    cl = tac(np.zeros((30, 1)), locs, MultiPolygon([rectangle(20, 20, 21, 21)]))
    assert cl.n_clusters == 1


def test_tac_splits_two_rooms():
    rng = np.random.default_rng(1)
    left = rng.uniform((0, 0), (4.5, 10), size=(15, 2))
    right = rng.uniform((5.5, 0), (10, 10), size=(15, 2))
    walls = MultiPolygon([rectangle(4.9, -1, 5.1, 11)])
    cl = tac(np.zeros((30, 1)), np.vstack([left, right]), walls)
    assert cl.n_clusters == 2
    assert len(set(cl.assignments[:15])) == 1 and len(set(cl.assignments[15:])) == 1


wall_st = st.tuples(st.floats(0, 18), st.floats(0, 18), st.floats(0.1, 4), st.floats(0.1, 4))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 20), st.floats(0, 20)), min_size=1, max_size=25),
       st.lists(wall_st, min_size=0, max_size=4))
def test_tac_clusters_never_enclose_a_wall(pts, wall_specs):
    walls = MultiPolygon([rectangle(x, y, x + w, y + h) for x, y, w, h in wall_specs])
    locs = np.array(pts)
    cl = tac(np.zeros((len(locs), 1)), locs, walls)
    assert sorted(set(cl.assignments.tolist())) == list(range(cl.n_clusters))
    for members in cl.members():
        if len(members) > 1:
            assert not entity_exist([tuple(p) for p in locs[members]], walls)
    # maximality: no two clusters could still merge
    groups = [locs[m] for m in cl.members()]
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            union = [tuple(p) for p in np.vstack([groups[i], groups[j]])]
            assert walls.intersects(convex_hull(union))


def test_tac_labels_ordered_by_first_member():
    locs = np.array([(8.0, 0), (0, 0), (8.5, 0), (0.5, 0)])
    walls = MultiPolygon([rectangle(3.9, -1, 4.1, 1)])
    cl = tac(np.zeros((4, 1)), locs, walls)
    assert cl.assignments.tolist() == [0, 1, 0, 1]
