"""DBSCAN (grid and naive), mean-shift, and the spatial index."""

import numpy as np
import pytest

from centerseg import (
    GridIndex,
    dbscan,
    dbscan_naive,
    mean_shift,
    neighbor_counts,
    radius_neighbors,
)


def random_cloud(rng, n):
    """Blobs, uniform scatter, or a mix, like the clouds votes produce."""
    kind = rng.random()
    if kind < 0.4:
        k = int(rng.integers(1, 8))
        centers = rng.uniform(0, 120, (k, 2))
        pts = centers[rng.integers(0, k, n)] + rng.normal(0, rng.uniform(0.4, 3.0), (n, 2))
    elif kind < 0.7:
        pts = rng.uniform(0, rng.uniform(20, 300), (n, 2))
    else:
        k = int(rng.integers(1, 5))
        centers = rng.uniform(0, 80, (k, 2))
        blob = centers[rng.integers(0, k, n // 2)] + rng.normal(0, 1.0, (n // 2, 2))
        noise = rng.uniform(0, 80, (n - n // 2, 2))
        pts = np.vstack([blob, noise])
    return pts


def test_empty_input():
    for fn in (dbscan, dbscan_naive):
        labels = fn(np.zeros((0, 2)), 2.5, 50)
        assert labels.n_groups == 0 and len(labels) == 0
    labels = mean_shift(np.zeros((0, 2)))
    assert labels.n_groups == 0


def test_singletons():
    for fn in (dbscan, dbscan_naive):
        one = fn([[1.0, 2.0]], 2.5, 1)
        assert one.n_groups == 1 and list(one.labels) == [1]
        none = fn([[1.0, 2.0]], 2.5, 2)
        assert none.n_groups == 0 and list(none.labels) == [0]


def test_parameter_validation():
    for fn in (dbscan, dbscan_naive):
        with pytest.raises(ValueError):
            fn([[0.0, 0.0]], 0.0, 1)
        with pytest.raises(ValueError):
            fn([[0.0, 0.0]], 1.0, 0)
    with pytest.raises(ValueError):
        mean_shift([[0.0, 0.0]], bandwidth=0.0)


def test_two_blobs_match_oracle():
    rng = np.random.default_rng(123)
    a = rng.normal(0, 1.0, (60, 2))
    b = rng.normal(0, 1.0, (60, 2)) + [50.0, 0.0]
    pts = np.vstack([a, b])
    fast = dbscan(pts, 2.5, 50)
    slow = dbscan_naive(pts, 2.5, 50)
    assert fast == slow
    assert fast.n_groups == 2


def test_oracle_equivalence_random_clouds():
    rng = np.random.default_rng(2024)
    for _ in range(25):
        n = int(rng.integers(0, 900))
        pts = random_cloud(rng, n) if n else np.zeros((0, 2))
        eps = float(rng.uniform(0.5, 12.0))
        min_pts = int(rng.integers(1, 50))
        assert dbscan(pts, eps, min_pts) == dbscan_naive(pts, eps, min_pts)


def test_border_points_join_first_cluster():
    # two dense packs sharing one border point equidistant from both
    left = [[0.0, 0.0]] * 4
    right = [[4.0, 0.0]] * 4
    border = [[2.0, 0.0]]
    pts = np.array(left + right + border)
    labels = dbscan(pts, 2.0, 4)
    # the border point is reachable from both packs; scan order says pack 1
    assert labels.labels[-1] == 1
    assert labels == dbscan_naive(pts, 2.0, 4)


def test_permutation_robustness_core_structure():
    rng = np.random.default_rng(9)
    pts = random_cloud(rng, 400)
    eps, min_pts = 2.0, 8
    base = dbscan(pts, eps, min_pts)

    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    within = d2 <= eps * eps
    core = within.sum(1) >= min_pts
    lonely_noise = ~core & ~(within & core[None, :]).any(1)

    perm = rng.permutation(len(pts))
    shuffled = dbscan(pts[perm], eps, min_pts)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    back = shuffled.labels[inv]

    assert shuffled.n_groups == base.n_groups
    # core partition identical up to relabeling
    for m in range(1, base.n_groups + 1):
        members = np.flatnonzero((base.labels == m) & core)
        if members.size:
            assert len(set(back[members])) == 1
    # non-border noise identical
    assert np.array_equal(back[lonely_noise] == 0, base.labels[lonely_noise] == 0)
    assert np.all(back[lonely_noise] == 0)


def test_translation_invariance():
    rng = np.random.default_rng(31)
    pts = random_cloud(rng, 300)
    base = dbscan(pts, 1.5, 6)
    moved = dbscan(pts + np.array([123.0, -45.0]), 1.5, 6)
    assert base == moved


def test_mean_shift_coincident():
    labels = mean_shift(np.array([[5.0, 5.0]] * 12), bandwidth=3.0)
    assert labels.n_groups == 1
    assert set(labels.labels) == {1}


def test_mean_shift_two_far_groups():
    pts = np.array([[0.0, 0.0]] * 6 + [[100.0, 0.0]] * 6)
    labels = mean_shift(pts, bandwidth=10.0)
    assert labels.n_groups == 2
    assert len(set(labels.labels[:6])) == 1
    assert len(set(labels.labels[6:])) == 1
    assert labels.labels[0] != labels.labels[6]


def test_mean_shift_single_point():
    labels = mean_shift([[3.0, 4.0]], bandwidth=2.0)
    assert labels.n_groups == 1


def test_mean_shift_has_no_noise_label():
    rng = np.random.default_rng(8)
    pts = random_cloud(rng, 200)
    labels = mean_shift(pts, bandwidth=5.0)
    assert labels.labels.min() >= 1


def test_grid_index_empty():
    index = GridIndex(np.zeros((0, 2)), 2.0)
    assert radius_neighbors(index, (0.0, 0.0), 2.0).size == 0


def test_radius_boundary_is_closed():
    index = GridIndex(np.array([[3.0, 0.0]]), 3.0)
    assert list(radius_neighbors(index, (0.0, 0.0), 3.0)) == [0]


def test_radius_mismatch_rejected():
    index = GridIndex(np.array([[0.0, 0.0]]), 2.0)
    with pytest.raises(ValueError):
        radius_neighbors(index, (0.0, 0.0), 3.0)


def test_radius_neighbors_vs_exhaustive():
    rng = np.random.default_rng(55)
    pts = rng.uniform(-40, 40, (500, 2))
    r = 4.0
    index = GridIndex(pts, r)
    for _ in range(50):
        q = rng.uniform(-45, 45, 2)
        got = radius_neighbors(index, q, r)
        d2 = ((pts - q) ** 2).sum(1)
        expected = np.flatnonzero(d2 <= r * r)
        assert np.array_equal(got, expected)


def test_neighbor_counts_vs_bruteforce():
    rng = np.random.default_rng(77)
    pts = rng.uniform(0, 50, (400, 2))
    r = 3.0
    got = neighbor_counts(pts, r)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    assert np.array_equal(got, (d2 <= r * r).sum(1))
