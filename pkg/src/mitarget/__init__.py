"""Discriminative multiple-instance target characterization.

MI-SMF and MI-ACE learn a target signature from bag-labeled, mixed training
data by maximizing the matched-filter or cosine detection statistic of the
best instance in each positive bag against the average negative response.
"""

from .detectors import Mode, TargetSignature, ace_score, score_dataset, smf_score
from .evalkit import auc, kmeans_negative_bags, nauc, roc_curve
from .spectral import Bag, BagSet, BackgroundStats, compute_background_stats, unwhiten_signature, whiten
from .training import TrainConfig, TrainResult, train, train_linear_discriminant

__version__ = "0.1.0"

__all__ = [
    "Bag",
    "BagSet",
    "BackgroundStats",
    "Mode",
    "TargetSignature",
    "TrainConfig",
    "TrainResult",
    "ace_score",
    "auc",
    "compute_background_stats",
    "kmeans_negative_bags",
    "nauc",
    "roc_curve",
    "score_dataset",
    "smf_score",
    "train",
    "train_linear_discriminant",
    "unwhiten_signature",
    "whiten",
]
