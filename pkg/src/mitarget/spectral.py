"""Bag data model, background statistics and the whitening transform."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionMismatchError,
    InsufficientDataError,
    SingularCovarianceError,
    ValidationError,
    ZeroSignatureError,
    ZeroVectorError,
)

__all__ = [
    "Bag",
    "BagSet",
    "BackgroundStats",
    "WhitenedInstance",
    "compute_background_stats",
    "whiten",
    "whiten_signature",
    "unwhiten_signature",
    "normalize_rows",
    "ZERO_TOL",
]

# norms below this are treated as exactly zero
ZERO_TOL = 1e-12
# eigenvalues at or below this fraction of the largest are rejected
SINGULAR_RTOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Bag:
    """A labeled multiset of instances.

    ``instances`` is an ``(n, d)`` array, one instance per row. ``label`` is
    ``True`` for a positive bag.
    """

    label: bool
    instances: np.ndarray
    bag_id: str = ""

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.instances, dtype=float))
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValidationError(f"bag {self.bag_id!r} must hold at least one instance of dimension >= 1")
        if not np.all(np.isfinite(x)):
            raise ValidationError(f"bag {self.bag_id!r} contains non-finite values")
        object.__setattr__(self, "instances", _frozen(x))
        object.__setattr__(self, "label", bool(self.label))

    def __len__(self):
        return self.instances.shape[0]

    @property
    def d(self) -> int:
        return self.instances.shape[1]


@dataclass(frozen=True)
class BagSet:
    bags: tuple

    def __init__(self, bags: Iterable[Bag]):
        bags = tuple(bags)
        dims = {b.d for b in bags}
        if len(dims) > 1:
            raise DimensionMismatchError(f"bags disagree on dimensionality: {sorted(dims)}")
        object.__setattr__(self, "bags", bags)

    def __len__(self):
        return len(self.bags)

    def __iter__(self):
        return iter(self.bags)

    @property
    def d(self) -> int:
        if not self.bags:
            raise ConfigurationError("empty bag set has no dimensionality")
        return self.bags[0].d

    @property
    def positive(self) -> list[Bag]:
        return [b for b in self.bags if b.label]

    @property
    def negative(self) -> list[Bag]:
        return [b for b in self.bags if not b.label]

    @property
    def n_positive(self) -> int:
        return len(self.positive)

    @property
    def n_negative(self) -> int:
        return len(self.negative)

    @property
    def n_instances(self) -> int:
        return sum(len(b) for b in self.bags)

    def instances(self, which: str = "all") -> np.ndarray:
        """Stack instances of ``"all"``, ``"positive"`` or ``"negative"`` bags."""
        pool = {"all": self.bags, "positive": self.positive, "negative": self.negative}[which]
        if not pool:
            return np.empty((0, self.d if self.bags else 0))
        return np.vstack([b.instances for b in pool])

    def require_both_labels(self):
        if self.n_positive < 1 or self.n_negative < 1:
            raise ConfigurationError(
                f"training needs at least one positive and one negative bag "
                f"(got {self.n_positive} positive, {self.n_negative} negative)"
            )


@dataclass(frozen=True)
class BackgroundStats:
    """Background mean/covariance and the eigendecomposition used for whitening.

    Eigenvalues are sorted in descending order; ``eigvecs[:, k]`` pairs with
    ``eigvals[k]``.
    """

    mean: np.ndarray
    cov: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    regularization: float = 0.0
    _whitener: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("mean", "cov", "eigvecs", "eigvals"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "_whitener", _frozen(self.eigvecs.T / np.sqrt(self.eigvals)[:, None]))

    @classmethod
    def from_moments(cls, mean, cov, regularization: float = 0.0) -> "BackgroundStats":
        """Build stats from a mean and an already-regularized covariance."""
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimensionMismatchError(f"covariance shape {cov.shape} does not match mean length {d}")
        sym = 0.5 * (cov + cov.T)
        w, v = np.linalg.eigh(sym)
        order = np.argsort(-w, kind="stable")
        w, v = w[order], v[:, order]
        # fix eigenvector signs: largest-magnitude entry positive
        lead = v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])]
        v = v * np.where(lead < 0, -1.0, 1.0)
        top = w[0]
        bad = w <= SINGULAR_RTOL * top if top > 0 else np.ones_like(w, dtype=bool)
        if np.any(bad):
            worst = float(w[bad][-1])
            raise SingularCovarianceError(
                f"background covariance is singular: eigenvalue {worst:.6g} "
                f"<= {SINGULAR_RTOL:g} x largest eigenvalue {top:.6g}",
                eigenvalue=worst,
            )
        return cls(mean=mean, cov=sym, eigvecs=v, eigvals=w, regularization=regularization)

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    @property
    def whitening_matrix(self) -> np.ndarray:
        """D^{-1/2} U^T."""
        return self._whitener

    def check_dim(self, d: int):
        if d != self.d:
            raise DimensionMismatchError(f"dimension {d} does not match background statistics dimension {self.d}")

    def transform(self, X) -> np.ndarray:
        """Whiten rows of ``X`` (mean subtracted). Accepts ``(d,)`` or ``(n, d)``."""
        X = np.asarray(X, dtype=float)
        self.check_dim(X.shape[-1])
        return (X - self.mean) @ self._whitener.T


@dataclass(frozen=True)
class WhitenedInstance:
    hat: np.ndarray
    unit: np.ndarray | None = None


def compute_background_stats(
    data,
    regularization: float | None = None,
    scope: str = "negative",
) -> BackgroundStats:
    """Estimate background statistics.

    ``data`` is either an ``(n, d)`` array or a :class:`BagSet`; for a bag set
    ``scope`` picks the negative-bag instances (``"negative"``) or every
    instance (``"global"``). The covariance is the population (1/N) estimate
    plus ``regularization * I``; ``None`` selects ``1e-6 * trace / d``.
    """
    if isinstance(data, BagSet):
        if scope not in ("negative", "global"):
            raise ValidationError(f"unknown whitening scope {scope!r}")
        X = data.instances("negative" if scope == "negative" else "all")
    else:
        X = np.atleast_2d(np.asarray(data, dtype=float))
    if X.shape[0] < 2:
        raise InsufficientDataError(f"background statistics need at least 2 instances, got {X.shape[0]}")
    if X.shape[1] < 1:
        raise ValidationError("instances must have dimension >= 1")
    if not np.all(np.isfinite(X)):
        raise ValidationError("instances contain non-finite values")

    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / X.shape[0]
    d = X.shape[1]
    if regularization is None:
        regularization = 1e-6 * np.trace(cov) / d
    if regularization < 0:
        raise ValidationError("regularization must be nonnegative")
    cov = cov + regularization * np.eye(d)
    return BackgroundStats.from_moments(mean, cov, regularization=float(regularization))


def normalize_rows(Xh: np.ndarray, strict: bool = True) -> np.ndarray:
    """Scale rows to unit norm.

    With ``strict`` a zero row raises :class:`ZeroVectorError`; otherwise it is
    left as zeros so it contributes nothing to sums or scores.
    """
    Xh = np.asarray(Xh, dtype=float)
    norms = np.linalg.norm(Xh, axis=-1, keepdims=True)
    zero = norms < ZERO_TOL
    if strict and np.any(zero):
        idx = np.flatnonzero(zero.ravel())
        raise ZeroVectorError(f"instance(s) {idx.tolist()} coincide with the background mean")
    return np.where(zero, 0.0, Xh / np.where(zero, 1.0, norms))


def whiten(x, stats: BackgroundStats, normalize: bool = False) -> WhitenedInstance:
    """D^{-1/2} U^T (x - mu_b), optionally with its unit-norm version."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError("whiten takes a single instance; use BackgroundStats.transform for batches")
    hat = stats.transform(x)
    unit = None
    if normalize:
        n = np.linalg.norm(hat)
        if n < ZERO_TOL:
            raise ZeroVectorError("instance coincides with the background mean")
        unit = hat / n
    return WhitenedInstance(hat=hat, unit=unit)


def whiten_signature(s, stats: BackgroundStats) -> np.ndarray:
    """Unit-norm whitened direction of a signature (no mean subtraction)."""
    s = np.asarray(s, dtype=float)
    stats.check_dim(s.shape[0])
    sh = stats.whitening_matrix @ s
    n = np.linalg.norm(sh)
    if n < ZERO_TOL:
        raise ZeroSignatureError("target signature is zero")
    return sh / n


def unwhiten_signature(s_unit, stats: BackgroundStats) -> np.ndarray:
    """Map a whitened unit signature back to the original space, unit norm."""
    s_unit = np.asarray(s_unit, dtype=float)
    stats.check_dim(s_unit.shape[0])
    if abs(np.linalg.norm(s_unit) - 1.0) > 1e-9:
        raise ValidationError("whitened signature must have unit norm")
    t = stats.eigvecs @ (np.sqrt(stats.eigvals) * s_unit)
    return t / np.linalg.norm(t)


def as_bagset(bags: BagSet | Sequence[Bag]) -> BagSet:
    return bags if isinstance(bags, BagSet) else BagSet(bags)
