"""Diverse Density objective and the EM-DD / EM-DD-P baselines.

EM-DD alternates an E-step that keeps one representative instance per bag
(the one with the highest concept response) and an M-step that runs
gradient ascent on the log Noisy-OR likelihood of those representatives:

    sum_pos log p(x*) + sum_neg log(1 - p(x*)),  p(x) = exp(-sum_k c_k (x_k - t_k)^2)

over the point ``t`` and, for EM-DD proper, the nonnegative scales ``c``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteGradientError, ValidationError
from .spectral import as_bagset

logger = logging.getLogger(__name__)

__all__ = [
    "DDConcept",
    "EMDDConfig",
    "EMDDResult",
    "dd_objective",
    "dd_log_objective",
    "emdd_predict",
    "emdd_log_likelihood",
    "emdd_gradient",
    "emdd_train",
]


@dataclass(frozen=True)
class DDConcept:
    point: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        p = np.array(self.point, dtype=float)
        c = np.array(self.scales, dtype=float)
        if p.shape != c.shape or p.ndim != 1:
            raise ValidationError("concept point and scales must be vectors of equal length")
        if np.any(c < 0):
            raise ValidationError("concept scales must be nonnegative")
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "scales", c)

    def to_dict(self) -> dict:
        return {"point": self.point.tolist(), "scales": self.scales.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "DDConcept":
        return cls(point=doc["point"], scales=doc["scales"])


@dataclass(frozen=True)
class EMDDConfig:
    max_iterations: int = 500
    max_gradient_steps: int = 100
    tol: float = 1e-8
    armijo: float = 1e-4
    max_halvings: int = 60


@dataclass(frozen=True)
class EMDDResult:
    concept: DDConcept
    iterations: int
    log_likelihood: float
    history: tuple = ()


def _sq_dist(X, s, scales=None):
    diff = np.atleast_2d(X) - s
    if scales is None:
        return np.einsum("ij,ij->i", diff, diff)
    return diff**2 @ scales


def _log1m_exp(q):
    """log(1 - exp(-q)) for q >= 0; -inf at q == 0."""
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-q))


def dd_log_objective(s, bags) -> float:
    """Natural log of the Noisy-OR diverse density at concept point ``s``."""
    bags = as_bagset(bags)
    if len(bags) == 0:
        raise ValidationError("diverse density needs at least one bag")
    s = np.asarray(s, dtype=float)
    total = 0.0
    for bag in bags:
        log_miss = _log1m_exp(_sq_dist(bag.instances, s))
        if bag.label:
            # log(1 - prod_j (1 - exp(-d_j^2)))
            total += float(_log1m_exp(-np.sum(log_miss)))
        else:
            total += float(np.sum(log_miss))
    return total


def dd_objective(s, bags) -> float:
    return float(np.exp(dd_log_objective(s, bags)))


def emdd_predict(x, concept: DDConcept):
    """exp(-sum_k c_k (x_k - t_k)^2); works on one instance or rows of a matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != concept.point.shape[0]:
        raise ValidationError(f"instance dimension {x.shape[-1]} does not match concept dimension {concept.point.shape[0]}")
    q = _sq_dist(x, concept.point, concept.scales)
    out = np.exp(-q)
    return float(out[0]) if x.ndim == 1 else out


def _split(selected_pos, selected_neg):
    return np.atleast_2d(selected_pos), np.atleast_2d(selected_neg)


def emdd_log_likelihood(point, scales, pos, neg) -> float:
    """Log-likelihood of the representative instances ``pos``/``neg`` (rows)."""
    pos, neg = _split(pos, neg)
    qp = _sq_dist(pos, point, scales)
    qn = _sq_dist(neg, point, scales)
    return float(-qp.sum() + _log1m_exp(qn).sum())


def emdd_gradient(point, scales, pos, neg):
    """Gradient of :func:`emdd_log_likelihood` w.r.t. ``(point, scales)``."""
    pos, neg = _split(pos, neg)
    dp = pos - point
    dn = neg - point
    qn = dn**2 @ scales
    with np.errstate(divide="ignore"):
        # d/dq log(1 - e^{-q}) = 1 / expm1(q)
        w = 1.0 / np.expm1(qn)
    g_point = 2.0 * scales * dp.sum(axis=0) - 2.0 * scales * (w[:, None] * dn).sum(axis=0)
    g_scales = -(dp**2).sum(axis=0) + (w[:, None] * dn**2).sum(axis=0)
    return g_point, g_scales


def _e_step(point, scales, pos_bags, neg_bags):
    concept = DDConcept(point, scales)
    sel_pos = tuple(int(np.argmax(emdd_predict(B, concept))) for B in pos_bags)
    sel_neg = tuple(int(np.argmax(emdd_predict(B, concept))) for B in neg_bags)
    pos = np.array([B[i] for B, i in zip(pos_bags, sel_pos)])
    neg = np.array([B[i] for B, i in zip(neg_bags, sel_neg)])
    return (sel_pos, sel_neg), pos, neg


def _m_step(point, scales, pos, neg, estimate_scales, cfg: EMDDConfig):
    """Projected gradient ascent with Armijo backtracking."""
    ll = emdd_log_likelihood(point, scales, pos, neg)
    for _ in range(cfg.max_gradient_steps):
        gp, gc = emdd_gradient(point, scales, pos, neg)
        if not estimate_scales:
            gc = np.zeros_like(gc)
        if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gc))):
            raise NonFiniteGradientError(
                f"EM-DD gradient is not finite (log-likelihood {ll:.6g}); "
                "a negative representative likely coincides with the concept point"
            )
        gnorm2 = float(gp @ gp + gc @ gc)
        if gnorm2 == 0.0:
            break
        step = 1.0
        accepted = False
        for _ in range(cfg.max_halvings):
            new_p = point + step * gp
            new_c = np.maximum(scales + step * gc, 0.0) if estimate_scales else scales
            new_ll = emdd_log_likelihood(new_p, new_c, pos, neg)
            moved2 = float((new_p - point) @ (new_p - point) + (new_c - scales) @ (new_c - scales))
            # Armijo condition on the projected step
            if np.isfinite(new_ll) and new_ll >= ll + cfg.armijo * moved2 / step:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        gain = new_ll - ll
        point, scales, ll = new_p, new_c, new_ll
        if gain < cfg.tol:
            break
    return point, scales, ll


def emdd_train(bags, estimate_scales: bool = True, config: EMDDConfig | None = None, init_point=None) -> EMDDResult:
    """Fit an EM-DD concept (``estimate_scales=False`` gives EM-DD-P).

    The point starts at the positive instance with the highest diverse
    density (unless ``init_point`` is given); scales start at one.
    """
    cfg = config or EMDDConfig()
    bags = as_bagset(bags)
    bags.require_both_labels()
    pos_bags = [b.instances for b in bags.positive]
    neg_bags = [b.instances for b in bags.negative]
    d = bags.d

    if init_point is None:
        candidates = np.vstack(pos_bags)
        scores = [dd_log_objective(c, bags) for c in candidates]
        point = candidates[int(np.argmax(scores))].copy()
    else:
        point = np.asarray(init_point, dtype=float).copy()
    scales = np.ones(d)

    prev_ll = -np.inf
    seen = set()
    history = []
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        sel, pos, neg = _e_step(point, scales, pos_bags, neg_bags)
        point, scales, ll = _m_step(point, scales, pos, neg, estimate_scales, cfg)
        history.append(ll)
        if sel in seen or abs(ll - prev_ll) < cfg.tol:
            break
        seen.add(sel)
        prev_ll = ll
    else:
        logger.warning("EM-DD reached max_iterations=%d", cfg.max_iterations)
    if not estimate_scales:
        scales = np.ones(d)
    return EMDDResult(DDConcept(point, scales), it, float(history[-1]), tuple(history))
