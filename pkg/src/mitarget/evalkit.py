"""ROC / AUC / NAUC metrics and k-means construction of negative bags."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateLabelsError, ValidationError
from .spectral import Bag

__all__ = [
    "RocCurve",
    "roc_curve",
    "auc",
    "nauc",
    "partial_area",
    "KMeansResult",
    "kmeans",
    "kmeans_negative_bags",
]


@dataclass(frozen=True)
class RocCurve:
    """ROC points from (0, 0) to (1, 1); ``far`` is the per-instance false alarm rate."""

    far: np.ndarray
    pd: np.ndarray
    thresholds: np.ndarray
    n_positive: int
    n_negative: int

    def points(self):
        return list(zip(self.far.tolist(), self.pd.tolist()))


def roc_curve(scores, labels) -> RocCurve:
    """Sweep thresholds over the distinct scores, highest first.

    Equal scores switch together, so ties contribute a diagonal segment.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValidationError(f"{scores.size} scores but {labels.size} labels")
    if not np.all(np.isfinite(scores)):
        raise ValidationError("scores must be finite")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValidationError("labels must be binary (0/1)")
    y = labels.astype(bool)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError(f"ROC needs both classes (got {n_pos} positive, {n_neg} negative)")

    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tps = np.cumsum(y)[last_of_group]
    fps = np.cumsum(~y)[last_of_group]
    return RocCurve(
        far=np.r_[0.0, fps / n_neg],
        pd=np.r_[0.0, tps / n_pos],
        thresholds=np.r_[np.inf, s[last_of_group]],
        n_positive=n_pos,
        n_negative=n_neg,
    )


def _trapezoid(x, y) -> float:
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) * 0.5))


def auc(curve: RocCurve) -> float:
    # integer counts keep the sum exact; one division at the end
    fp = np.rint(curve.far * curve.n_negative)
    tp = np.rint(curve.pd * curve.n_positive)
    if np.allclose(fp / curve.n_negative, curve.far, rtol=0, atol=1e-12) and np.allclose(
        tp / curve.n_positive, curve.pd, rtol=0, atol=1e-12
    ):
        twice = float(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
        return twice / (2.0 * curve.n_negative * curve.n_positive)
    return _trapezoid(curve.far, curve.pd)


def partial_area(curve: RocCurve, far_max: float) -> float:
    """Area under the curve for FAR in [0, far_max], interpolating at the cut.

    Past the last point the curve is held at its final detection rate.
    """
    if not far_max > 0:
        raise ValidationError("far_max must be positive")
    far, pd = curve.far, curve.pd
    beyond = np.flatnonzero(far > far_max)
    if beyond.size == 0:
        return auc(curve) + float((far_max - far[-1]) * pd[-1])
    i = int(beyond[0])
    x0, x1, y0, y1 = far[i - 1], far[i], pd[i - 1], pd[i]
    y_cut = float(y0 + (y1 - y0) * (far_max - x0) / (x1 - x0))
    return _trapezoid(np.r_[far[:i], far_max], np.r_[pd[:i], y_cut])


def nauc(curve: RocCurve, far_max: float) -> float:
    """Partial area up to ``far_max`` divided by ``far_max``; 1 is a perfect detector."""
    return partial_area(curve, far_max) / far_max


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia_history: tuple
    iterations: int
    converged: bool


def _sq_dists(X, C):
    d2 = (X * X).sum(axis=1)[:, None] - 2.0 * X @ C.T + (C * C).sum(axis=1)[None, :]
    return np.maximum(d2, 0.0)


def kmeans(X, K: int, seed: int = 0, max_iterations: int = 300) -> KMeansResult:
    """Lloyd's algorithm with squared Euclidean distance.

    Centers start at ``K`` distinct rows sampled with ``seed``. A cluster that
    goes empty is reseeded with the point farthest from its current center.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    if K < 1 or K > N:
        raise ConfigurationError(f"k-means needs 1 <= K <= N (got K={K}, N={N})")
    rng = np.random.default_rng(seed)
    centers = X[np.sort(rng.choice(N, size=K, replace=False))].copy()
    labels = None
    history = []
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        d2 = _sq_dists(X, centers)
        new_labels = np.argmin(d2, axis=1)
        counts = np.bincount(new_labels, minlength=K)
        if np.any(counts == 0):
            cost = d2[np.arange(N), new_labels]
            for k in np.flatnonzero(counts == 0):
                # take the worst-fit point from a cluster that can spare it
                for far in np.argsort(-cost, kind="mergesort"):
                    if counts[new_labels[far]] > 1:
                        break
                counts[new_labels[far]] -= 1
                new_labels[far] = k
                counts[k] = 1
                cost[far] = 0.0
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        centers = np.array([X[labels == k].mean(axis=0) for k in range(K)])
        history.append(float(np.sum((X - centers[labels]) ** 2)))
    return KMeansResult(labels=labels, centers=centers, inertia_history=tuple(history),
                        iterations=it, converged=converged)


def kmeans_negative_bags(X, K: int, seed: int = 0) -> list[Bag]:
    """Split instances into ``K`` negative bags by k-means cluster."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    if K < 1 or K > N:
        raise ConfigurationError(f"k-means needs 1 <= K <= N (got K={K}, N={N})")
    if K == N:
        return [Bag(label=False, instances=X[i:i + 1], bag_id=f"kmeans{i:03d}") for i in range(N)]
    result = kmeans(X, K, seed)
    return [
        Bag(label=False, instances=X[result.labels == k], bag_id=f"kmeans{k:03d}") for k in range(K)
    ]
