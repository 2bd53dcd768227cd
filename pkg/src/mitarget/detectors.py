"""Spectral matched filter (SMF) and adaptive cosine estimator (ACE).

Scores are computed in whitened coordinates: with ``x_hat = D^{-1/2} U^T (x - mu)``
and ``s_hat`` the unit whitened signature, SMF is ``s_hat . x_hat`` and ACE is
the cosine between the two. ``smf_direct``/``ace_direct`` evaluate the
textbook formulas with an explicit covariance solve and exist as references.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ValidationError, ZeroSignatureError, ZeroVectorError
from .spectral import ZERO_TOL, BackgroundStats, whiten_signature

__all__ = [
    "Mode",
    "TargetSignature",
    "DetectionScores",
    "smf_score",
    "ace_score",
    "smf_scores",
    "ace_scores",
    "smf_direct",
    "ace_direct",
    "score_dataset",
]


class Mode(str, enum.Enum):
    SMF = "smf"
    ACE = "ace"
    LINEAR = "lindisc"


@dataclass(frozen=True)
class TargetSignature:
    """A learned or given target signature.

    For SMF/ACE ``s`` is the unit-norm signature in the original space and
    ``whitened`` its unit-norm whitened direction under ``stats``. For the
    linear discriminant ``s`` holds ``d`` weights followed by a bias term and
    ``stats`` is ``None``.
    """

    s: np.ndarray
    whitened: np.ndarray | None
    mode: Mode
    stats: BackgroundStats | None = field(default=None, repr=False)
    name: str = ""

    @classmethod
    def from_original(cls, s, stats: BackgroundStats, mode, name: str = "") -> "TargetSignature":
        s = np.asarray(s, dtype=float)
        n = np.linalg.norm(s)
        if n < ZERO_TOL:
            raise ZeroSignatureError("target signature is zero")
        s = s / n
        return cls(s=s, whitened=whiten_signature(s, stats), mode=Mode(mode), stats=stats, name=name)

    @property
    def d(self) -> int:
        return self.s.shape[0] - 1 if self.mode is Mode.LINEAR else self.s.shape[0]


@dataclass(frozen=True)
class DetectionScores:
    scores: np.ndarray
    mode: Mode
    signature_id: str = ""

    def __len__(self):
        return self.scores.shape[0]


def smf_scores(X, s, stats: BackgroundStats) -> np.ndarray:
    s_hat = whiten_signature(s, stats)
    return stats.transform(X) @ s_hat


def ace_scores(X, s, stats: BackgroundStats) -> np.ndarray:
    s_hat = whiten_signature(s, stats)
    Xh = np.atleast_2d(stats.transform(X))
    norms = np.linalg.norm(Xh, axis=1)
    zero = norms < ZERO_TOL
    if np.any(zero):
        raise ZeroVectorError(
            f"instance(s) {np.flatnonzero(zero).tolist()} coincide with the background mean; ACE is undefined"
        )
    out = (Xh @ s_hat) / norms
    return out if np.ndim(X) > 1 else out[0]


def smf_score(x, s, stats: BackgroundStats) -> float:
    return float(smf_scores(np.asarray(x, dtype=float), s, stats))


def ace_score(x, s, stats: BackgroundStats) -> float:
    return float(ace_scores(np.asarray(x, dtype=float), s, stats))


def smf_direct(x, s, stats: BackgroundStats) -> float:
    s = np.asarray(s, dtype=float)
    if np.linalg.norm(s) < ZERO_TOL:
        raise ZeroSignatureError("target signature is zero")
    xc = np.asarray(x, dtype=float) - stats.mean
    si = np.linalg.solve(stats.cov, s)
    return float(si @ xc / np.sqrt(s @ si))


def ace_direct(x, s, stats: BackgroundStats) -> float:
    s = np.asarray(s, dtype=float)
    if np.linalg.norm(s) < ZERO_TOL:
        raise ZeroSignatureError("target signature is zero")
    xc = np.asarray(x, dtype=float) - stats.mean
    xx = xc @ np.linalg.solve(stats.cov, xc)
    if xx < ZERO_TOL**2:
        raise ZeroVectorError("instance coincides with the background mean; ACE is undefined")
    si = np.linalg.solve(stats.cov, s)
    return float(si @ xc / (np.sqrt(s @ si) * np.sqrt(xx)))


def linear_scores(X, weights) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    w = np.asarray(weights, dtype=float)
    if X.shape[1] + 1 != w.shape[0]:
        raise DimensionMismatchError(f"instances have dimension {X.shape[1]}, discriminant expects {w.shape[0] - 1}")
    return X @ w[:-1] + w[-1]


def score_dataset(instances, sig: TargetSignature) -> DetectionScores:
    """Score every row of ``instances`` with the signature's own detector."""
    X = np.asarray(instances, dtype=float)
    if X.size == 0:
        return DetectionScores(np.empty(0), sig.mode, sig.name)
    X = np.atleast_2d(X)
    if sig.mode is Mode.LINEAR:
        return DetectionScores(linear_scores(X, sig.s), sig.mode, sig.name)
    if sig.stats is None:
        raise ValidationError("SMF/ACE signatures need background statistics")
    sig.stats.check_dim(X.shape[1])
    Xh = sig.stats.transform(X)
    scores = Xh @ sig.whitened
    if sig.mode is Mode.ACE:
        norms = np.linalg.norm(Xh, axis=1)
        zero = norms < ZERO_TOL
        if np.any(zero):
            raise ZeroVectorError(
                f"instance(s) {np.flatnonzero(zero).tolist()} coincide with the background mean; ACE is undefined"
            )
        scores = scores / norms
    return DetectionScores(scores, sig.mode, sig.name)
