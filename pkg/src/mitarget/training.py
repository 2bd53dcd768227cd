"""Multiple-instance signature learning (MI-SMF, MI-ACE, linear discriminant).

Training alternates between picking, in every positive bag, the instance
that scores highest under the current whitened signature and replacing the
signature with the normalized difference between the mean of those picks and
the (fixed) average of the negative bags' bag means. Both steps can only
raise the objective, and the loop stops as soon as a selection repeats.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .detectors import Mode, TargetSignature
from .errors import DegenerateUpdateError, NoValidCandidateError, ValidationError
from .spectral import (
    ZERO_TOL,
    BackgroundStats,
    BagSet,
    as_bagset,
    compute_background_stats,
    normalize_rows,
    unwhiten_signature,
)

logger = logging.getLogger(__name__)

__all__ = [
    "TrainConfig",
    "PreparedBags",
    "SelectionState",
    "TrainResult",
    "prepare_bags",
    "objective",
    "select_instances",
    "update_signature",
    "initialize_signature",
    "train",
    "train_linear_discriminant",
]


@dataclass(frozen=True)
class TrainConfig:
    mode: Mode = Mode.ACE
    max_iterations: int = 100
    scope: str = "negative"
    regularization: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        problems = []
        if int(self.max_iterations) < 1:
            problems.append("max_iterations must be >= 1")
        if self.scope not in ("negative", "global"):
            problems.append(f"scope must be 'negative' or 'global', got {self.scope!r}")
        if self.regularization is not None and self.regularization < 0:
            problems.append("regularization must be nonnegative")
        if problems:
            raise ValidationError("; ".join(problems), problems)


@dataclass(frozen=True)
class PreparedBags:
    """Bags mapped into the coordinates the objective works in.

    SMF: whitened instances. ACE: whitened and normalized. Linear: raw
    instances with a trailing constant 1. ``neg_term`` caches the average of
    negative-bag means, which never changes during training.
    """

    positive: tuple
    negative: tuple
    mode: Mode
    neg_term: np.ndarray
    stats: BackgroundStats | None = field(default=None, repr=False)

    @property
    def n_positive(self) -> int:
        return len(self.positive)

    @property
    def n_negative(self) -> int:
        return len(self.negative)


@dataclass(frozen=True)
class SelectionState:
    selected: tuple
    iteration: int = 0

    @property
    def key(self) -> tuple:
        return self.selected

    def digest(self) -> str:
        return hashlib.sha1(",".join(map(str, self.selected)).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class TrainResult:
    signature: TargetSignature
    unit: np.ndarray
    iterations: int
    objective: float
    converged: bool
    objective_history: tuple = ()
    selections: tuple = ()
    stats: BackgroundStats | None = field(default=None, repr=False)

    @property
    def mode(self) -> Mode:
        return self.signature.mode

    def trace_rows(self):
        """(iteration, objective, selection hash) per update, for trace dumps."""
        rows = []
        for i, sel in enumerate(self.selections):
            rows.append((i + 1, self.objective_history[i + 1], sel.digest()))
        return rows


def prepare_bags(bags, stats: BackgroundStats | None, mode) -> PreparedBags:
    bags = as_bagset(bags)
    bags.require_both_labels()
    mode = Mode(mode)
    if mode is Mode.LINEAR:
        def tx(X):
            return np.hstack([X, np.ones((X.shape[0], 1))])
    else:
        if stats is None:
            raise ValidationError("SMF/ACE training needs background statistics")
        stats.check_dim(bags.d)
        if mode is Mode.ACE:
            def tx(X):
                # instances at the background mean have no direction; they stay zero
                return normalize_rows(stats.transform(X), strict=False)
        else:
            def tx(X):
                return stats.transform(X)

    pos = tuple(tx(b.instances) for b in bags.positive)
    neg = tuple(tx(b.instances) for b in bags.negative)
    neg_term = np.mean([n.mean(axis=0) for n in neg], axis=0)
    for a in pos + neg:
        a.setflags(write=False)
    return PreparedBags(positive=pos, negative=neg, mode=mode, neg_term=neg_term, stats=stats)


def _positive_term(s, prepared: PreparedBags) -> float:
    return float(np.mean([np.max(B @ s) for B in prepared.positive]))


def objective(s_unit, prepared: PreparedBags) -> float:
    """Mean best positive-bag score minus the mean of negative-bag mean scores."""
    s = np.asarray(s_unit, dtype=float)
    return _positive_term(s, prepared) - float(prepared.neg_term @ s)


def select_instances(s_unit, prepared: PreparedBags, iteration: int = 0) -> SelectionState:
    s = np.asarray(s_unit, dtype=float)
    # np.argmax returns the first maximum, so ties go to the lowest index
    return SelectionState(tuple(int(np.argmax(B @ s)) for B in prepared.positive), iteration)


def update_signature(selection: SelectionState, prepared: PreparedBags) -> np.ndarray:
    if len(selection.selected) != prepared.n_positive:
        raise ValidationError("selection must name one instance per positive bag")
    picks = np.array([B[i] for B, i in zip(prepared.positive, selection.selected)])
    t = picks.mean(axis=0) - prepared.neg_term
    n = np.linalg.norm(t)
    if n < ZERO_TOL:
        raise DegenerateUpdateError(
            "selected positive mean equals the negative mean; the bags carry no discriminative direction"
        )
    return t / n


def _objectives_for(candidates: np.ndarray, prepared: PreparedBags) -> np.ndarray:
    sizes = [B.shape[0] for B in prepared.positive]
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    P = np.vstack(prepared.positive)
    per_bag_max = np.maximum.reduceat(P @ candidates.T, starts, axis=0)
    return per_bag_max.mean(axis=0) - candidates @ prepared.neg_term


def initialize_signature(prepared: PreparedBags) -> np.ndarray:
    """Best-objective positive instance, as a unit vector (first one wins ties)."""
    P = np.vstack(prepared.positive)
    norms = np.linalg.norm(P, axis=1)
    valid = norms >= ZERO_TOL
    if not np.any(valid):
        raise NoValidCandidateError("every positive instance coincides with the background mean")
    candidates = P[valid] / norms[valid, None]
    # score in blocks to bound memory on large positive sets
    scores = np.concatenate([
        _objectives_for(candidates[i:i + 512], prepared) for i in range(0, candidates.shape[0], 512)
    ])
    return candidates[int(np.argmax(scores))]


def _run(prepared: PreparedBags, max_iterations: int):
    s = initialize_signature(prepared)
    history = [objective(s, prepared)]
    seen = set()
    selections = []
    converged = False
    for it in range(1, max_iterations + 1):
        sel = select_instances(s, prepared, iteration=it)
        if sel.key in seen:
            converged = True
            break
        seen.add(sel.key)
        selections.append(sel)
        s = update_signature(sel, prepared)
        history.append(objective(s, prepared))
    else:
        # budget spent; converged only if the last signature reproduces a seen selection
        converged = select_instances(s, prepared).key in seen
    if not converged:
        logger.warning("training stopped at max_iterations=%d without a repeated selection", max_iterations)
    return s, history, selections, converged


def train(bags, config: TrainConfig | None = None) -> TrainResult:
    """Learn a discriminative target signature from labeled bags."""
    config = config or TrainConfig()
    bags = as_bagset(bags)
    if config.mode is Mode.LINEAR:
        return train_linear_discriminant(bags, config)
    bags.require_both_labels()
    stats = compute_background_stats(bags, config.regularization, config.scope)
    prepared = prepare_bags(bags, stats, config.mode)
    s_unit, history, selections, converged = _run(prepared, config.max_iterations)
    sig = TargetSignature(
        s=unwhiten_signature(s_unit, stats), whitened=s_unit, mode=config.mode, stats=stats,
        name=f"mi-{config.mode.value}",
    )
    return TrainResult(
        signature=sig, unit=s_unit, iterations=len(selections), objective=history[-1],
        converged=converged, objective_history=tuple(history), selections=tuple(selections), stats=stats,
    )


def train_linear_discriminant(bags, config: TrainConfig | None = None) -> TrainResult:
    """Same alternation on raw instances with an appended bias coordinate.

    The returned weights have length ``d + 1`` (bias last) and unit norm.
    """
    config = config or TrainConfig(mode=Mode.LINEAR)
    prepared = prepare_bags(bags, None, Mode.LINEAR)
    w, history, selections, converged = _run(prepared, config.max_iterations)
    sig = TargetSignature(s=w, whitened=None, mode=Mode.LINEAR, stats=None, name="mi-lindisc")
    return TrainResult(
        signature=sig, unit=w, iterations=len(selections), objective=history[-1],
        converged=converged, objective_history=tuple(history), selections=tuple(selections),
    )


def objective_for_bags(s_unit, bags: BagSet, stats: BackgroundStats | None, mode) -> float:
    """Convenience: prepare ``bags`` and evaluate the objective once."""
    return objective(s_unit, prepare_bags(bags, stats, mode))
