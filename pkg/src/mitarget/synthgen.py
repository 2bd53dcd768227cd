"""Synthetic bags under the linear mixing model.

Every background instance is a convex combination of a random, uniformly
sized subset of the background endmembers with flat-Dirichlet weights. A
target instance mixes the target endmember at proportion ``alpha`` (Beta
distributed around the configured mean) with such a background mixture.
White Gaussian noise is then added at the requested SNR, where the SNR is
``10 log10(mean squared clean value / noise variance)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GenerationError, ValidationError
from .spectral import Bag, BagSet

__all__ = [
    "SyntheticConfig",
    "SyntheticDataset",
    "TestSet",
    "make_endmembers",
    "generate",
    "generate_test_set",
    "SIMPLEX_2D",
]

# target first, then two background materials
SIMPLEX_2D = np.array([
    [0.30, 0.90],
    [0.15, 0.25],
    [0.90, 0.30],
])

MIN_ANGLE_DEG = 15.0


@dataclass(frozen=True)
class SyntheticConfig:
    endmembers: np.ndarray
    n_pos_bags: int = 25
    n_neg_bags: int = 25
    instances_per_bag: int = 10
    targets_per_positive_bag: int = 2
    mean_target_proportion: float = 0.05
    target_concentration: float = 20.0
    snr_db: float = 20.0
    background_mask: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "endmembers", np.atleast_2d(np.asarray(self.endmembers, dtype=float)))
        if self.background_mask is not None:
            object.__setattr__(self, "background_mask", tuple(bool(m) for m in self.background_mask))
        problems = self.problems()
        if problems:
            raise ValidationError("invalid synthetic config: " + "; ".join(problems), problems)

    def problems(self) -> list[str]:
        out = []
        E = self.endmembers
        if E.ndim != 2 or E.shape[0] < 2:
            out.append("endmembers: need a target and at least one background endmember")
        elif not np.all(np.isfinite(E)):
            out.append("endmembers: values must be finite")
        for name in ("n_pos_bags", "n_neg_bags", "instances_per_bag", "targets_per_positive_bag"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                out.append(f"{name}: must be a positive integer, got {v!r}")
        if self.targets_per_positive_bag > self.instances_per_bag:
            out.append(
                f"targets_per_positive_bag: {self.targets_per_positive_bag} exceeds "
                f"instances_per_bag {self.instances_per_bag}"
            )
        if not 0.0 < self.mean_target_proportion < 1.0:
            out.append(f"mean_target_proportion: must lie in (0, 1), got {self.mean_target_proportion!r}")
        if not self.target_concentration > 0:
            out.append("target_concentration: must be positive")
        if math.isnan(self.snr_db):
            out.append("snr_db: must be a number (use inf for no noise)")
        if self.background_mask is not None and E.ndim == 2:
            if len(self.background_mask) != E.shape[0] - 1:
                out.append(
                    f"background_mask: expected {E.shape[0] - 1} entries (one per background endmember), "
                    f"got {len(self.background_mask)}"
                )
            elif not any(self.background_mask):
                out.append("background_mask: at least one background endmember must be allowed")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            out.append("seed: must be an integer in [0, 2^64)")
        return out

    @property
    def n_background(self) -> int:
        return self.endmembers.shape[0] - 1

    @property
    def allowed_with_target(self) -> np.ndarray:
        if self.background_mask is None:
            return np.arange(self.n_background)
        return np.flatnonzero(self.background_mask)


@dataclass(frozen=True)
class SyntheticDataset:
    bags: BagSet
    alphas: tuple          # per bag: target proportion per instance (0 for background)
    instance_labels: tuple  # per bag: True for instances with target content
    proportions: tuple     # per bag: (n, M) full mixing proportions, target column first
    target: np.ndarray
    config: SyntheticConfig = field(repr=False)

    def flat(self):
        """(X, bag_index, instance_label, alpha) over all instances in bag order."""
        X = self.bags.instances("all")
        bag_idx = np.concatenate([np.full(len(b), j) for j, b in enumerate(self.bags)])
        return X, bag_idx, np.concatenate(self.instance_labels), np.concatenate(self.alphas)


@dataclass(frozen=True)
class TestSet:
    X: np.ndarray
    labels: np.ndarray
    alphas: np.ndarray


def _smooth_curve(rng, d: int) -> np.ndarray:
    grid = np.arange(d, dtype=float)
    curve = np.full(d, rng.uniform(0.02, 0.15))
    curve += rng.uniform(-0.1, 0.1) * grid / max(d - 1, 1)
    for _ in range(rng.integers(2, 6)):
        center = rng.uniform(0, d - 1)
        width = rng.uniform(d / 25.0, d / 6.0)
        curve += rng.uniform(0.1, 1.0) * np.exp(-0.5 * ((grid - center) / width) ** 2)
    curve = np.clip(curve, 0.0, None)
    return curve * (rng.uniform(0.4, 0.9) / curve.max())


def _angle_deg(a, b) -> float:
    c = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def make_endmembers(kind: str = "smooth-spectra", d: int = 64, count: int = 4, seed: int = 0) -> np.ndarray:
    """Endmember spectra, one per row; row 0 plays the target.

    ``"smooth-spectra"`` draws nonnegative sums of Gaussian bumps with pairwise
    angles of at least 15 degrees. ``"simplex-2d"`` returns fixed triangle
    vertices for two-dimensional illustrations.
    """
    if count < 2:
        raise ValidationError("count: need at least 2 endmembers")
    if kind == "simplex-2d":
        if count != 3 or d != 2:
            raise ValidationError("simplex-2d provides exactly 3 endmembers of dimension 2")
        return SIMPLEX_2D.copy()
    if kind != "smooth-spectra":
        raise ValidationError(f"unknown endmember kind {kind!r}")
    if d < 2:
        raise ValidationError("d: need at least 2 bands")
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        for _ in range(100):
            cand = _smooth_curve(rng, d)
            if all(_angle_deg(cand, e) >= MIN_ANGLE_DEG for e in out):
                out.append(cand)
                break
        else:
            raise GenerationError(
                f"could not draw endmember {k} at >= {MIN_ANGLE_DEG} degrees from the others in 100 attempts"
            )
    return np.array(out)


def _background_mix(rng, n_bg: int, allowed: np.ndarray | None = None) -> np.ndarray:
    pool = np.arange(n_bg) if allowed is None else allowed
    k = int(rng.integers(1, len(pool) + 1))
    subset = rng.choice(pool, size=k, replace=False)
    w = np.zeros(n_bg)
    w[subset] = rng.dirichlet(np.ones(k))
    return w


def _draw_alpha(rng, mean: float, concentration: float) -> float:
    return float(rng.beta(mean * concentration, (1.0 - mean) * concentration))


def _instance_props(rng, cfg: SyntheticConfig, is_target: bool, mean_alpha: float) -> np.ndarray:
    props = np.zeros(cfg.n_background + 1)
    if is_target:
        alpha = _draw_alpha(rng, mean_alpha, cfg.target_concentration)
        props[0] = alpha
        props[1:] = (1.0 - alpha) * _background_mix(rng, cfg.n_background, cfg.allowed_with_target)
    else:
        props[1:] = _background_mix(rng, cfg.n_background)
    return props


def _add_noise(rng, clean: np.ndarray, snr_db: float) -> np.ndarray:
    if math.isinf(snr_db) and snr_db > 0:
        return clean.copy()
    power = float(np.mean(clean**2))
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    return clean + rng.normal(0.0, sigma, size=clean.shape)


def generate(config: SyntheticConfig) -> SyntheticDataset:
    """Draw a bag set. Positive bags come first, then negative bags."""
    rng = np.random.default_rng(config.seed)
    E = config.endmembers
    n = config.instances_per_bag
    props_per_bag, labels_per_bag, ids, bag_labels = [], [], [], []
    for j in range(config.n_pos_bags + config.n_neg_bags):
        positive = j < config.n_pos_bags
        is_target = np.zeros(n, dtype=bool)
        if positive:
            is_target[rng.choice(n, size=config.targets_per_positive_bag, replace=False)] = True
        props = np.array([
            _instance_props(rng, config, t, config.mean_target_proportion) for t in is_target
        ])
        props_per_bag.append(props)
        labels_per_bag.append(is_target)
        bag_labels.append(positive)
        ids.append(f"pos{j:03d}" if positive else f"neg{j - config.n_pos_bags:03d}")

    clean = np.vstack(props_per_bag) @ E
    noisy = _add_noise(rng, clean, config.snr_db)
    bags, start = [], 0
    for props, label, bag_id in zip(props_per_bag, bag_labels, ids):
        bags.append(Bag(label=label, instances=noisy[start:start + n], bag_id=bag_id))
        start += n
    return SyntheticDataset(
        bags=BagSet(bags),
        alphas=tuple(p[:, 0].copy() for p in props_per_bag),
        instance_labels=tuple(labels_per_bag),
        proportions=tuple(props_per_bag),
        target=E[0].copy(),
        config=config,
    )


def generate_test_set(
    config: SyntheticConfig,
    n_target: int = 25_000,
    n_background: int = 25_000,
    mean_target_proportion: float | None = None,
    seed: int | None = None,
) -> TestSet:
    """Flat labeled test instances drawn with ``config``'s mixing model.

    Target instances come first. ``mean_target_proportion`` and ``seed``
    default to the config's values.
    """
    if mean_target_proportion is not None:
        config = replace(config, mean_target_proportion=mean_target_proportion)
    rng = np.random.default_rng(config.seed if seed is None else seed)
    labels = np.concatenate([np.ones(n_target, dtype=bool), np.zeros(n_background, dtype=bool)])
    props = np.array([
        _instance_props(rng, config, t, config.mean_target_proportion) for t in labels
    ]).reshape(-1, config.n_background + 1)
    X = _add_noise(rng, props @ config.endmembers, config.snr_db)
    return TestSet(X=X, labels=labels, alphas=props[:, 0].copy())
