import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mitarget.errors import (
    DimensionMismatchError,
    InsufficientDataError,
    SingularCovarianceError,
    ValidationError,
    ZeroVectorError,
)
from mitarget.spectral import (
    Bag,
    BagSet,
    BackgroundStats,
    compute_background_stats,
    normalize_rows,
    unwhiten_signature,
    whiten,
    whiten_signature,
)


def random_stats(rng, d, n=200):
    A = rng.normal(size=(d, d))
    X = rng.normal(size=(n, d)) @ A + rng.normal(size=d)
    return compute_background_stats(X, regularization=0.0), X


def test_symmetric_point_set():
    stats = compute_background_stats(np.array([[1, 0], [-1, 0], [0, 1], [0, -1]]), regularization=0.0)
    np.testing.assert_allclose(stats.mean, [0, 0], atol=1e-15)
    np.testing.assert_allclose(stats.cov, np.diag([0.5, 0.5]), atol=1e-15)


def test_zero_variance_is_singular():
    with pytest.raises(SingularCovarianceError) as info:
        compute_background_stats(np.array([[3.0, 3.0], [3.0, 3.0]]), regularization=0.0)
    assert info.value.eigenvalue is not None
    assert "eigenvalue" in str(info.value)


def test_default_regularization_cannot_rescue_zero_variance():
    with pytest.raises(SingularCovarianceError):
        compute_background_stats(np.array([[3.0, 3.0], [3.0, 3.0]]))


def test_rank_deficient_is_singular_without_ridge():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(SingularCovarianceError):
        compute_background_stats(X, regularization=0.0)
    stats = compute_background_stats(X)
    assert stats.regularization == pytest.approx(1e-6 * np.trace(np.cov(X.T, bias=True)) / 2)
    assert np.all(stats.eigvals > 0)


def test_too_few_instances():
    with pytest.raises(InsufficientDataError):
        compute_background_stats(np.array([[1.0, 2.0]]))


def test_reconstruction_and_ordering():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 5))
    stats = compute_background_stats(X, regularization=0.0)
    # direct covariance formula
    mu = X.sum(axis=0) / 100
    direct = sum(np.outer(x - mu, x - mu) for x in X) / 100
    np.testing.assert_allclose(stats.cov, direct, rtol=1e-12, atol=1e-14)
    recon = stats.eigvecs @ np.diag(stats.eigvals) @ stats.eigvecs.T
    assert np.linalg.norm(recon - direct) / np.linalg.norm(direct) <= 1e-8
    assert np.all(np.diff(stats.eigvals) <= 0)
    np.testing.assert_allclose(stats.eigvecs.T @ stats.eigvecs, np.eye(5), atol=1e-12)


def test_bagset_scopes():
    rng = np.random.default_rng(2)
    pos = Bag(True, rng.normal(size=(4, 3)) + 5, "p")
    neg = Bag(False, rng.normal(size=(6, 3)), "n")
    bags = BagSet([pos, neg])
    s_neg = compute_background_stats(bags, regularization=0.0)
    s_all = compute_background_stats(bags, regularization=0.0, scope="global")
    np.testing.assert_allclose(s_neg.mean, neg.instances.mean(axis=0))
    np.testing.assert_allclose(s_all.mean, np.vstack([pos.instances, neg.instances]).mean(axis=0))
    with pytest.raises(ValidationError):
        compute_background_stats(bags, scope="local")


def test_identity_whitening():
    stats = BackgroundStats.from_moments([1.0, 1.0], np.eye(2))
    np.testing.assert_allclose(whiten([2.0, 1.0], stats).hat, [1.0, 0.0], atol=1e-15)


def test_axis_scaling():
    stats = BackgroundStats.from_moments([0.0, 0.0], np.diag([4.0, 1.0]))
    w = whiten([2.0, 0.0], stats, normalize=True)
    np.testing.assert_allclose(w.hat, [1.0, 0.0], atol=1e-15)
    assert np.linalg.norm(w.unit) == pytest.approx(1.0, abs=1e-12)


def test_whiten_zero_vector():
    stats = BackgroundStats.from_moments([1.0, 2.0], np.eye(2))
    with pytest.raises(ZeroVectorError):
        whiten([1.0, 2.0], stats, normalize=True)
    np.testing.assert_array_equal(whiten([1.0, 2.0], stats).hat, [0.0, 0.0])


def test_whiten_dimension_mismatch():
    stats = BackgroundStats.from_moments([0.0, 0.0], np.eye(2))
    with pytest.raises(DimensionMismatchError):
        whiten([1.0, 2.0, 3.0], stats)


def test_whitened_negatives_have_identity_covariance():
    rng = np.random.default_rng(3)
    stats, X = random_stats(rng, 6, n=500)
    Xh = stats.transform(X)
    # oracle: direct population covariance of the transformed set
    c = Xh - Xh.mean(axis=0)
    np.testing.assert_allclose(c.T @ c / len(Xh), np.eye(6), atol=1e-6)
    np.testing.assert_allclose(Xh.mean(axis=0), 0.0, atol=1e-10)


def test_unwhiten_identity_and_diagonal():
    ident = BackgroundStats.from_moments([0.0, 0.0], np.eye(2))
    np.testing.assert_allclose(unwhiten_signature([1.0, 0.0], ident), [1.0, 0.0], atol=1e-15)
    diag = BackgroundStats.from_moments([0.0, 0.0], np.diag([4.0, 1.0]))
    # t = (2, 0) before normalization
    np.testing.assert_allclose(unwhiten_signature([1.0, 0.0], diag), [1.0, 0.0], atol=1e-15)


def test_unwhiten_requires_unit_norm():
    stats = BackgroundStats.from_moments([0.0, 0.0], np.eye(2))
    with pytest.raises(ValidationError):
        unwhiten_signature([2.0, 0.0], stats)


def test_round_trip_100_random_unit_vectors():
    rng = np.random.default_rng(4)
    stats, _ = random_stats(rng, 7)
    for _ in range(100):
        v = rng.normal(size=7)
        v /= np.linalg.norm(v)
        s = unwhiten_signature(v, stats)
        assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(whiten_signature(s, stats), v, atol=1e-8)


def test_normalize_rows_modes():
    X = np.array([[3.0, 4.0], [0.0, 0.0]])
    with pytest.raises(ZeroVectorError):
        normalize_rows(X)
    out = normalize_rows(X, strict=False)
    np.testing.assert_allclose(out, [[0.6, 0.8], [0.0, 0.0]])


def test_bag_invariants():
    with pytest.raises(ValidationError):
        Bag(True, np.empty((0, 3)))
    with pytest.raises(ValidationError):
        Bag(True, [[1.0, np.nan]])
    b = Bag(1, [[1.0, 2.0]])
    assert b.label is True
    with pytest.raises(Exception):
        b.label = False
    with pytest.raises(ValueError):
        b.instances[0, 0] = 5.0
    with pytest.raises(DimensionMismatchError):
        BagSet([Bag(True, [[1.0, 2.0]]), Bag(False, [[1.0, 2.0, 3.0]])])


def test_determinism():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(50, 4))
    a = compute_background_stats(X)
    b = compute_background_stats(X.copy())
    assert np.array_equal(a.eigvecs, b.eigvecs) and np.array_equal(a.eigvals, b.eigvals)
    assert np.array_equal(a.transform(X), b.transform(X))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=2**32 - 1))
def test_whitening_identity_property(d, seed):
    rng = np.random.default_rng(seed)
    n = 20 * d + 5
    X = rng.normal(size=(n, d)) @ rng.normal(size=(d, d)) + rng.normal(size=d) * 3
    try:
        stats = compute_background_stats(X, regularization=0.0)
    except SingularCovarianceError:
        return
    if stats.eigvals[-1] / stats.eigvals[0] < 1e-8:
        return  # ill-conditioned draws lose the 1e-6 budget to round-off
    Xh = stats.transform(X)
    c = Xh - Xh.mean(axis=0)
    np.testing.assert_allclose(c.T @ c / n, np.eye(d), atol=1e-6)
