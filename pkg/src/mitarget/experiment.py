"""Seeded experiment harness and the simulated-table designs.

Each cell fixes a training-data generator and a test-set recipe; every run
draws fresh train/test sets from seeds derived from ``(master seed, cell, run)``,
trains each algorithm, scores the test set and records AUC or NAUC.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import emdd_predict, emdd_train
from .detectors import Mode, TargetSignature, score_dataset
from .errors import MitargetError, ValidationError
from .evalkit import auc, nauc, roc_curve
from .spectral import compute_background_stats
from .synthgen import SyntheticConfig, generate, generate_test_set, make_endmembers
from .training import TrainConfig, train

logger = logging.getLogger(__name__)

ALGORITHMS = ("mi-smf", "mi-ace", "mi-lindisc", "emdd", "emddp", "true-smf", "true-ace")

__all__ = [
    "ALGORITHMS",
    "Cell",
    "ExperimentSpec",
    "ResultRow",
    "ExperimentResult",
    "run_experiment",
    "fit_and_score",
    "preset",
    "PRESETS",
]


@dataclass(frozen=True)
class Cell:
    name: str
    train: SyntheticConfig
    test_mean_target_proportion: float = 0.15
    n_test_target: int = 25_000
    n_test_background: int = 25_000


@dataclass(frozen=True)
class ExperimentSpec:
    cells: tuple
    algorithms: tuple = ("mi-smf", "mi-ace")
    runs: int = 10
    metric: str = "auc"
    far_max: float = 1e-3
    seed: int = 0
    scope: str = "negative"

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        problems = []
        if int(self.runs) < 1:
            problems.append("runs: must be >= 1")
        if not self.cells:
            problems.append("cells: need at least one cell")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            problems.append(f"algorithms: unknown {unknown}; choose from {list(ALGORITHMS)}")
        if self.metric not in ("auc", "nauc"):
            problems.append("metric: must be 'auc' or 'nauc'")
        if not self.far_max > 0:
            problems.append("far_max: must be positive")
        if self.scope not in ("negative", "global"):
            problems.append("scope: must be 'negative' or 'global'")
        if problems:
            raise ValidationError("invalid experiment spec: " + "; ".join(problems), problems)


@dataclass(frozen=True)
class ResultRow:
    cell: str
    algorithm: str
    mean: float
    std: float
    mean_runtime_s: float
    values: tuple = ()
    failures: tuple = ()


@dataclass
class ExperimentResult:
    rows: list
    rocs: dict = field(default_factory=dict)  # (cell, algorithm) -> RocCurve of run 0

    def row(self, cell: str, algorithm: str) -> ResultRow:
        for r in self.rows:
            if r.cell == cell and r.algorithm == algorithm:
                return r
        raise KeyError((cell, algorithm))

    @property
    def failures(self):
        return [(r.cell, r.algorithm, f) for r in self.rows for f in r.failures]


def run_seeds(master: int, cell_index: int, run: int) -> tuple[int, int]:
    """(train seed, test seed) for one run; stable across platforms."""
    state = np.random.SeedSequence([master, cell_index, run]).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def fit_and_score(algorithm: str, bags, X_test, true_target=None, scope: str = "negative"):
    """Train ``algorithm`` on ``bags`` and score ``X_test``.

    Returns ``(scores, fit_seconds)``. The ``true-*`` references score with the
    generating target (background mean subtracted) under the training stats.
    """
    t0 = time.perf_counter()
    if algorithm in ("mi-smf", "mi-ace", "mi-lindisc"):
        mode = {"mi-smf": Mode.SMF, "mi-ace": Mode.ACE, "mi-lindisc": Mode.LINEAR}[algorithm]
        result = train(bags, TrainConfig(mode=mode, scope=scope))
        elapsed = time.perf_counter() - t0
        return score_dataset(X_test, result.signature).scores, elapsed
    if algorithm in ("emdd", "emddp"):
        fit = emdd_train(bags, estimate_scales=algorithm == "emdd")
        elapsed = time.perf_counter() - t0
        return emdd_predict(np.atleast_2d(X_test), fit.concept), elapsed
    if algorithm in ("true-smf", "true-ace"):
        if true_target is None:
            raise ValidationError("true-signature references need the generating target")
        stats = compute_background_stats(bags, scope=scope)
        mode = Mode.SMF if algorithm == "true-smf" else Mode.ACE
        sig = TargetSignature.from_original(np.asarray(true_target) - stats.mean, stats, mode, name=algorithm)
        elapsed = time.perf_counter() - t0
        return score_dataset(X_test, sig).scores, elapsed
    raise ValidationError(f"unknown algorithm {algorithm!r}")


def run_experiment(spec: ExperimentSpec, progress=None) -> ExperimentResult:
    rows, rocs = [], {}
    for ci, cell in enumerate(spec.cells):
        values = {a: [] for a in spec.algorithms}
        times = {a: [] for a in spec.algorithms}
        failures = {a: [] for a in spec.algorithms}
        for run in range(spec.runs):
            train_seed, test_seed = run_seeds(spec.seed, ci, run)
            try:
                data = generate(replace(cell.train, seed=train_seed))
                test = generate_test_set(
                    cell.train, cell.n_test_target, cell.n_test_background,
                    mean_target_proportion=cell.test_mean_target_proportion, seed=test_seed,
                )
            except MitargetError as exc:
                for a in spec.algorithms:
                    failures[a].append(f"run {run}: data generation failed: {exc}")
                continue
            for alg in spec.algorithms:
                try:
                    scores, secs = fit_and_score(alg, data.bags, test.X, data.target, spec.scope)
                    curve = roc_curve(scores, test.labels)
                except (MitargetError, FloatingPointError, np.linalg.LinAlgError) as exc:
                    logger.warning("cell %s run %d %s failed: %s", cell.name, run, alg, exc)
                    failures[alg].append(f"run {run}: {type(exc).__name__}: {exc}")
                    continue
                value = auc(curve) if spec.metric == "auc" else nauc(curve, spec.far_max)
                values[alg].append(value)
                times[alg].append(secs)
                if (cell.name, alg) not in rocs:
                    rocs[(cell.name, alg)] = curve
            if progress:
                progress(cell.name, run)
        for alg in spec.algorithms:
            v = np.array(values[alg])
            rows.append(ResultRow(
                cell=cell.name,
                algorithm=alg,
                mean=float(v.mean()) if v.size else math.nan,
                std=float(v.std()) if v.size else math.nan,
                mean_runtime_s=float(np.mean(times[alg])) if times[alg] else math.nan,
                values=tuple(v.tolist()),
                failures=tuple(failures[alg]),
            ))
    return ExperimentResult(rows=rows, rocs=rocs)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _hyperspectral_endmembers(d: int, endmember_seed: int) -> np.ndarray:
    return make_endmembers("smooth-spectra", d=d, count=4, seed=endmember_seed)


def table1(test_scale: float = 1.0, d: int = 64, endmember_seed: int = 0,
           proportions=(0.25, 0.15, 0.05), snr_db: float = 20.0) -> list[Cell]:
    """Vary the share of positive bags among 50 (2 targets/bag, alpha 0.05)."""
    E = _hyperspectral_endmembers(d, endmember_seed)
    n_test = max(1, _round_half_up(25_000 * test_scale))
    cells = []
    for p in proportions:
        n_pos = _round_half_up(50 * p)
        cfg = SyntheticConfig(endmembers=E, n_pos_bags=n_pos, n_neg_bags=50 - n_pos, instances_per_bag=10,
                              targets_per_positive_bag=2, mean_target_proportion=0.05, snr_db=snr_db)
        cells.append(Cell(f"pos_bags={p}", cfg, 0.15, n_test, n_test))
    return cells


def table2(test_scale: float = 1.0, d: int = 64, endmember_seed: int = 0,
           proportions=(0.25, 0.15, 0.05), snr_db: float = 20.0) -> list[Cell]:
    """Vary the share of target points in each positive bag (25/25 bags, alpha 0.05)."""
    E = _hyperspectral_endmembers(d, endmember_seed)
    n_test = max(1, _round_half_up(25_000 * test_scale))
    cells = []
    for p in proportions:
        cfg = SyntheticConfig(endmembers=E, n_pos_bags=25, n_neg_bags=25, instances_per_bag=10,
                              targets_per_positive_bag=max(1, _round_half_up(10 * p)),
                              mean_target_proportion=0.05, snr_db=snr_db)
        cells.append(Cell(f"target_points={p}", cfg, 0.15, n_test, n_test))
    return cells


def table3(test_scale: float = 1.0, d: int = 64, endmember_seed: int = 0,
           proportions=(0.25, 0.15, 0.05), snr_db: float = 20.0) -> list[Cell]:
    """Vary the mean target proportion of target points (25/25 bags, 2 targets/bag)."""
    E = _hyperspectral_endmembers(d, endmember_seed)
    n_test = max(1, _round_half_up(25_000 * test_scale))
    cells = []
    for p in proportions:
        cfg = SyntheticConfig(endmembers=E, n_pos_bags=25, n_neg_bags=25, instances_per_bag=10,
                              targets_per_positive_bag=2, mean_target_proportion=p, snr_db=snr_db)
        cells.append(Cell(f"alpha={p}", cfg, 0.15, n_test, n_test))
    return cells


def contextual(n_test: int = 2_000, snr_db: float = 20.0) -> list[Cell]:
    """Two 2-d datasets: target mixed with either background, or with only one."""
    E = make_endmembers("simplex-2d", d=2, count=3)
    common = dict(endmembers=E, n_pos_bags=10, n_neg_bags=10, instances_per_bag=10,
                  targets_per_positive_bag=3, mean_target_proportion=0.2, snr_db=snr_db)
    return [
        Cell("dataset1", SyntheticConfig(**common), 0.2, n_test, n_test),
        Cell("dataset2", SyntheticConfig(**common, background_mask=(True, False)), 0.2, n_test, n_test),
    ]


PRESETS = {"table1": table1, "table2": table2, "table3": table3, "contextual": contextual}


def preset(name: str, **kwargs) -> list[Cell]:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**kwargs)
