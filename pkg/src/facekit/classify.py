"""Nearest-neighbour identification and (weighted) majority voting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (AllZeroWeights, EmptyGallery, LengthMismatch, NoVotes,
                     ShapeMismatch)
from .linalg import cosine_distance, frobenius_distance

METRICS = ("frobenius", "cosine")
_PAIR_DISTANCE = {"frobenius": frobenius_distance, "cosine": cosine_distance}


@dataclass(frozen=True)
class KnnConfig:
    k: int = 1
    metric: str = "cosine"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")


def vote_from_distances(distances, labels, k: int) -> int:
    """Modal label among the ``k`` closest gallery entries.

    Equal distances keep gallery order.  When several labels share the top
    count, the one held by the closest of those neighbours wins.
    """
    distances = np.asarray(distances)
    if k == 1:
        return int(labels[int(np.argmin(distances))])
    nearest = np.argsort(distances, kind="stable")[:k]
    nearest_labels = labels[nearest]
    values, counts = np.unique(nearest_labels, return_counts=True)
    tied = values[counts == counts.max()]
    if len(tied) == 1:
        return int(tied[0])
    for label in nearest_labels:
        if label in tied:
            return int(label)
    return int(tied.min())


def knn_predict(query, gallery, cfg: KnnConfig) -> int:
    """Label ``query`` from a list of ``(features, label)`` gallery pairs."""
    if not gallery:
        raise EmptyGallery("gallery is empty")
    if cfg.k > len(gallery):
        raise ValueError(f"k = {cfg.k} exceeds gallery size {len(gallery)}")
    query = np.asarray(getattr(query, "values", query), dtype=np.float64)
    distance = _PAIR_DISTANCE[cfg.metric]
    dists, labels = [], []
    for feat, label in gallery:
        feat = np.asarray(getattr(feat, "values", feat), dtype=np.float64)
        if feat.shape != query.shape:
            raise ShapeMismatch(f"gallery feature {feat.shape} vs query {query.shape}")
        dists.append(distance(query, feat))
        labels.append(label)
    return vote_from_distances(np.array(dists), np.asarray(labels), cfg.k)


def knn_predict_matrix(dist, labels, k: int) -> np.ndarray:
    """Row-wise :func:`vote_from_distances` over a query x gallery matrix."""
    labels = np.asarray(labels)
    if k == 1:
        return labels[np.argmin(dist, axis=1)].astype(np.int64)
    return np.array([vote_from_distances(row, labels, k) for row in dist], dtype=np.int64)


@dataclass(frozen=True)
class VoteTally:
    support: np.ndarray
    decided: int


def _check_votes(votes, class_count):
    votes = np.asarray(votes, dtype=np.int64).ravel()
    if votes.size == 0:
        raise NoVotes("no classifier votes given")
    if votes.min() < 0 or votes.max() >= class_count:
        raise ValueError(f"votes must lie in [0, {class_count})")
    return votes


def majority_vote(votes, class_count: int) -> VoteTally:
    """One vote per classifier; ties go to the lowest class index."""
    votes = _check_votes(votes, class_count)
    support = np.bincount(votes, minlength=class_count).astype(np.float64)
    return VoteTally(support, int(np.argmax(support)))


def weighted_vote(votes, weights, class_count: int) -> VoteTally:
    votes = _check_votes(votes, class_count)
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if weights.shape != votes.shape:
        raise LengthMismatch(f"{len(votes)} votes but {len(weights)} weights")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and non-negative")
    if not np.any(weights):
        raise AllZeroWeights("every classifier weight is zero")
    support = np.bincount(votes, weights=weights, minlength=class_count)
    return VoteTally(support, int(np.argmax(support)))


def weighted_vote_matrix(predictions, weights, class_count: int) -> np.ndarray:
    """Decisions for many items at once.

    ``predictions`` is ``(T, Q)``: classifier ``t``'s label for item ``q``.
    Support is accumulated classifier by classifier, the same order
    :func:`weighted_vote` sums in, so decisions match it exactly.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if predictions.ndim != 2 or len(weights) != len(predictions):
        raise LengthMismatch("need one weight per classifier row")
    if not np.any(weights):
        raise AllZeroWeights("every classifier weight is zero")
    items = np.arange(predictions.shape[1])
    support = np.zeros((predictions.shape[1], class_count))
    for row, w in zip(predictions, weights):
        support[items, row] += w
    return np.argmax(support, axis=1)
