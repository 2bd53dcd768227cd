import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mitarget.errors import ConfigurationError, DegenerateLabelsError, ValidationError
from mitarget.evalkit import auc, kmeans, kmeans_negative_bags, nauc, partial_area, roc_curve


def mann_whitney(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def dense_partial_area(curve, far_max, per_segment=64):
    # midpoint rule on a grid containing every breakpoint; exact for piecewise-linear curves
    far, pd = curve.far, curve.pd
    knots = np.unique(np.r_[far[far < far_max], far_max])
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        edges = np.linspace(a, b, per_segment + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        total += float(np.sum(np.interp(mids, far, pd) * np.diff(edges)))
    if far_max > far[-1]:
        total += (far_max - far[-1]) * pd[-1]
    return total


def random_scores(rng, n=100, ties=True):
    scores = rng.integers(0, 30, size=n).astype(float) if ties else rng.normal(size=n)
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1
    return scores, labels


def test_perfect_ranking_points():
    c = roc_curve([2.0, 1.0], [1, 0])
    assert c.points() == [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    assert auc(c) == 1.0


def test_inverted_ranking():
    assert auc(roc_curve([1.0, 2.0], [1, 0])) == 0.0


def test_ties_form_diagonal():
    c = roc_curve([1.0, 1.0], [1, 0])
    assert c.points() == [(0.0, 0.0), (1.0, 1.0)]
    assert auc(c) == 0.5


def test_single_class_and_bad_input():
    with pytest.raises(DegenerateLabelsError):
        roc_curve([1.0, 2.0], [1, 1])
    with pytest.raises(ValidationError):
        roc_curve([1.0, 2.0], [1, 2])
    with pytest.raises(ValidationError):
        roc_curve([1.0], [1, 0])
    with pytest.raises(ValidationError):
        roc_curve([np.nan, 1.0], [1, 0])


def test_auc_equals_mann_whitney_100_sets():
    rng = np.random.default_rng(0)
    for k in range(100):
        scores, labels = random_scores(rng, ties=k % 2 == 0)
        assert abs(auc(roc_curve(scores, labels)) - mann_whitney(scores, labels)) <= 1e-12


def test_curve_invariants():
    rng = np.random.default_rng(1)
    scores, labels = random_scores(rng, 200)
    c = roc_curve(scores, labels)
    assert (c.far[0], c.pd[0]) == (0.0, 0.0)
    assert (c.far[-1], c.pd[-1]) == (1.0, 1.0)
    assert np.all(np.diff(c.far) >= 0) and np.all(np.diff(c.pd) >= 0)
    assert c.n_positive + c.n_negative == 200


def test_monotone_transform_invariance():
    rng = np.random.default_rng(2)
    scores, labels = random_scores(rng, 150, ties=False)
    a = roc_curve(scores, labels)
    b = roc_curve(np.exp(3 * scores) + 7, labels)
    assert np.array_equal(a.far, b.far) and np.array_equal(a.pd, b.pd)


def test_nauc_identities():
    rng = np.random.default_rng(3)
    for _ in range(20):
        c = roc_curve(*random_scores(rng))
        assert nauc(c, 1.0) == auc(c)
    perfect = roc_curve([5.0, 4.0, 1.0, 0.0], [1, 1, 0, 0])
    for far_max in (1e-3, 0.3, 1.0, 2.0):
        assert nauc(perfect, far_max) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValidationError):
        nauc(perfect, 0.0)


def test_nauc_matches_dense_integration():
    rng = np.random.default_rng(4)
    for k in range(30):
        n = 5000
        scores = rng.normal(size=n)
        labels = (rng.random(n) < 0.5).astype(int)
        scores[labels == 1] += 1.0
        c = roc_curve(np.round(scores, 1) if k % 2 else scores, labels)
        for far_max in (1e-3, 0.01, 0.37):
            assert abs(nauc(c, far_max) - dense_partial_area(c, far_max) / far_max) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 1.5), st.floats(1e-4, 1.5))
def test_partial_area_nondecreasing(seed, a, b):
    rng = np.random.default_rng(seed)
    c = roc_curve(*random_scores(rng, 60))
    lo, hi = min(a, b), max(a, b)
    assert partial_area(c, lo) <= partial_area(c, hi) + 1e-15


# k-means

def test_kmeans_k1_and_kn():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 3))
    one = kmeans_negative_bags(X, 1, seed=0)
    assert len(one) == 1 and np.array_equal(one[0].instances, X)
    singles = kmeans_negative_bags(X, 20, seed=0)
    assert len(singles) == 20 and all(len(b) == 1 for b in singles)
    assert all(not b.label for b in singles)
    with pytest.raises(ConfigurationError):
        kmeans_negative_bags(X, 21)
    with pytest.raises(ConfigurationError):
        kmeans(X, 0)


def test_two_blobs_partition():
    rng = np.random.default_rng(6)
    centers = np.array([[0.0, 0.0, 0.0], [10.0, 10.0, 10.0]])
    X = np.vstack([centers[0] + rng.normal(size=(50, 3)), centers[1] + rng.normal(size=(70, 3))])
    truth = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    for seed in range(5):
        res = kmeans(X, 2, seed=seed)
        assert res.converged
        same = np.array_equal(res.labels, truth) or np.array_equal(res.labels, 1 - truth)
        assert same


def test_every_instance_assigned_once_and_inertia_nonincreasing():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(300, 4))
    bags = kmeans_negative_bags(X, 15, seed=3)
    assert len(bags) == 15 and sum(len(b) for b in bags) == 300
    stacked = np.vstack([b.instances for b in bags])
    assert sorted(map(tuple, stacked)) == sorted(map(tuple, X))
    res = kmeans(X, 15, seed=3)
    hist = np.array(res.inertia_history)
    assert np.all(np.diff(hist) <= 1e-9)
    assert np.bincount(res.labels, minlength=15).min() >= 1


def test_kmeans_duplicates_keep_clusters_nonempty():
    X = np.array([[0.0, 0.0]] * 6 + [[1.0, 1.0]] * 2)
    res = kmeans(X, 3, seed=0)
    assert np.bincount(res.labels, minlength=3).min() >= 1


def test_kmeans_deterministic():
    X = np.random.default_rng(8).normal(size=(100, 2))
    a, b = kmeans(X, 5, seed=11), kmeans(X, 5, seed=11)
    assert np.array_equal(a.labels, b.labels) and np.array_equal(a.centers, b.centers)
