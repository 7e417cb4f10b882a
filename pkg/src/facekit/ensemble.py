"""Random-subspace ensembles over 2D PCA/LDA eigenvectors.

Every classifier is a random choice of ``d`` eigenvectors per used side.
Its credibility is the adjusted Rand index between the ground truth and
its leave-one-out nearest-neighbour predictions on the training set;
``ARI ** b`` becomes its vote weight when the test predictions of all
classifiers are combined.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .classify import KnnConfig, knn_predict_matrix, weighted_vote_matrix
from .errors import (CountOutOfRange, DegenerateARIWarning, DTooLarge, LengthMismatch,
                     MalformedHeader, TDenominatorZero, TooFewItems)
from .linalg import distance_matrix
from .subspace import MethodSpec, ProjectionBasis, dump_basis, fit_basis, project_stack

ARI_FLOOR = 1e-6
VOTING = ("weighted", "unweighted", "original")


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``FACEKIT_THREADS``, 0 meaning all cores."""
    if threads is None:
        raw = os.environ.get("FACEKIT_THREADS", "0").strip() or "0"
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"FACEKIT_THREADS must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ValueError("thread count must be >= 0")
    return threads or (os.cpu_count() or 1)


def sample_subspace(spectrum_size: int, d: int, rng) -> np.ndarray:
    """``d`` distinct eigenvector indices, uniform without replacement, sorted."""
    if not 1 <= d <= spectrum_size:
        raise DTooLarge(f"cannot draw {d} of {spectrum_size} eigenvectors")
    return np.sort(rng.choice(spectrum_size, size=d, replace=False))


@dataclass(frozen=True)
class ContingencyTable:
    o: np.ndarray
    a: np.ndarray
    b: np.ndarray
    total: int


def contingency_table(g, p) -> ContingencyTable:
    g, p = np.asarray(g).ravel(), np.asarray(p).ravel()
    if g.shape != p.shape:
        raise LengthMismatch(f"labelings have lengths {len(g)} and {len(p)}")
    _, gi = np.unique(g, return_inverse=True)
    _, pi = np.unique(p, return_inverse=True)
    o = np.zeros((gi.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(o, (gi, pi), 1)
    return ContingencyTable(o, o.sum(axis=1), o.sum(axis=0), len(g))


def _pairs(x):
    return int(np.sum(x * (x - 1) // 2))


def adjusted_rand_index(g, p) -> float:
    """Chance-corrected agreement of two partitions of the same items.

    Evaluated in integer arithmetic up to one final division.  If the
    denominator vanishes (both partitions a single cluster or all
    singletons) the result is 1.0 for identical partitions, else 0.0, and a
    :class:`DegenerateARIWarning` is issued.
    """
    table = contingency_table(g, p)
    if table.total < 2:
        raise TooFewItems("the adjusted Rand index needs at least two items")
    index = _pairs(table.o)
    sum_a, sum_b = _pairs(table.a), _pairs(table.b)
    all_pairs = table.total * (table.total - 1) // 2
    numerator = 2 * (index * all_pairs - sum_a * sum_b)
    denominator = (sum_a + sum_b) * all_pairs - 2 * sum_a * sum_b
    if denominator == 0:
        warnings.warn("adjusted Rand index denominator is zero", DegenerateARIWarning, stacklevel=2)
        identical = (np.all(np.count_nonzero(table.o, axis=0) == 1)
                     and np.all(np.count_nonzero(table.o, axis=1) == 1))
        return 1.0 if identical else 0.0
    return numerator / denominator


def entropy_measure(zeta, t: int, m: Optional[int] = None) -> float:
    """Ensemble diversity from per-item misclassification counts.

    0 when all classifiers agree on every item, 1 when they split as
    evenly as ``t`` allows.
    """
    zeta = np.asarray(zeta, dtype=np.int64).ravel()
    if t < 2:
        raise TDenominatorZero("entropy needs at least two classifiers")
    if m is not None and m != len(zeta):
        raise LengthMismatch(f"{len(zeta)} counts for {m} images")
    if len(zeta) == 0:
        raise TooFewItems("entropy needs at least one image")
    if zeta.min() < 0 or zeta.max() > t:
        raise CountOutOfRange(f"misclassification counts must lie in [0, {t}]")
    spread = np.minimum(zeta, t - zeta) / (t - math.ceil(t / 2))
    return float(np.mean(spread))


def weight_from_ari(ari: float, b: float) -> float:
    if b < 0:
        raise ValueError("b must be non-negative")
    return max(float(ari), ARI_FLOOR) ** b


def ensemble_weights(aris, b: float, voting: str = "weighted") -> np.ndarray:
    aris = np.asarray(aris, dtype=np.float64)
    if voting != "weighted" or np.all(aris <= ARI_FLOOR):
        return np.ones(len(aris))
    return np.array([weight_from_ari(a, b) for a in aris])


def loo_predictions(features, labels, knn: KnnConfig) -> np.ndarray:
    """Predict each item by KNN against all the other items."""
    features = np.asarray(features)
    if len(features) < 2:
        raise TooFewItems("leave-one-out needs at least two items")
    if knn.k > len(features) - 1:
        raise ValueError(f"k = {knn.k} exceeds the {len(features) - 1} remaining items")
    dist = distance_matrix(features, features, knn.metric)
    np.fill_diagonal(dist, np.inf)
    return knn_predict_matrix(dist, labels, knn.k)


def loo_credibility(features, labels, knn: KnnConfig) -> float:
    """ARI between ``labels`` and leave-one-out predictions on ``features``
    (the training images projected by one classifier)."""
    return adjusted_rand_index(labels, loo_predictions(features, labels, knn))


@dataclass(frozen=True)
class ClassifierSpec:
    left_indices: Optional[tuple]
    right_indices: Optional[tuple]
    ari: float
    weight: float


@dataclass(frozen=True)
class EnsembleConfig:
    method: MethodSpec
    t: int = 50
    d: int = 5
    knn: KnnConfig = field(default_factory=KnnConfig)
    b: float = 2.0
    seed: int = 0
    voting: str = "weighted"

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("T must be >= 1")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.b < 0:
            raise ValueError("b must be >= 0")
        if self.voting not in VOTING:
            raise ValueError(f"voting must be one of {VOTING}")

    @property
    def classifier_count(self) -> int:
        return 1 if self.voting == "original" else self.t


@dataclass(frozen=True)
class DiversityReport:
    zeta: np.ndarray
    t: int
    entropy: Optional[float]  # undefined for a single classifier


@dataclass(frozen=True)
class EnsembleResult:
    predictions: np.ndarray
    truth: np.ndarray
    classifiers: list
    diversity: DiversityReport
    accuracy: float
    test_votes: np.ndarray  # (T, test) per-classifier test predictions
    basis: ProjectionBasis = field(repr=False, compare=False)
    class_count: int = 0

    def recombine(self, b: float, voting: str = "weighted") -> np.ndarray:
        """Decisions from the same classifiers re-weighted with exponent ``b``."""
        aris = [c.ari for c in self.classifiers]
        return weighted_vote_matrix(self.test_votes, ensemble_weights(aris, b, voting), self.class_count)

    def accuracy_for(self, b: float, voting: str = "weighted") -> float:
        return float(np.mean(self.recombine(b, voting) == self.truth))


def _draw(basis, cfg, index):
    spec = basis.spec
    if cfg.voting == "original":
        left = tuple(range(cfg.d)) if spec.uses_left else None
        right = tuple(range(cfg.d)) if spec.uses_right else None
        for side, idx in (("left", left), ("right", right)):
            if idx is not None and cfg.d > len(basis.side(side)):
                raise DTooLarge(f"cannot keep {cfg.d} of {len(basis.side(side))} eigenvectors")
        return left, right
    rng = np.random.default_rng([cfg.seed, index])
    left = right = None
    if spec.uses_left:
        left = tuple(int(i) for i in sample_subspace(len(basis.left), cfg.d, rng))
    if spec.uses_right:
        right = tuple(int(i) for i in sample_subspace(len(basis.right), cfg.d, rng))
    return left, right


def fit_predict(ds, split, cfg: EnsembleConfig, threads: Optional[int] = None,
                basis: Optional[ProjectionBasis] = None) -> EnsembleResult:
    """Train the random-subspace ensemble on ``split.train_indices`` and
    classify ``split.test_indices``.

    Classifiers run on a thread pool; each draws from its own RNG stream
    seeded by ``(cfg.seed, index)`` so results do not depend on ``threads``.
    ``voting="original"`` builds one classifier from the top ``cfg.d``
    eigenvectors instead.
    """
    train = np.asarray(split.train_indices)
    test = np.asarray(split.test_indices)
    if basis is None:
        basis = fit_basis(ds, train, cfg.method)
    train_images, train_labels = ds.images[train], ds.labels[train]
    test_images, truth = ds.images[test], ds.labels[test]
    if cfg.knn.k > len(train) - 1:
        raise ValueError(f"k = {cfg.knn.k} leaves no neighbours for leave-one-out")

    def run(index):
        left, right = _draw(basis, cfg, index)
        train_feat = project_stack(train_images, basis, left, right)
        ari = loo_credibility(train_feat, train_labels, cfg.knn)
        test_feat = project_stack(test_images, basis, left, right)
        dist = distance_matrix(test_feat, train_feat, cfg.knn.metric)
        return left, right, ari, knn_predict_matrix(dist, train_labels, cfg.knn.k)

    count = cfg.classifier_count
    workers = min(resolve_threads(threads), count)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run, range(count)))
    else:
        outputs = [run(i) for i in range(count)]

    aris = [o[2] for o in outputs]
    weights = ensemble_weights(aris, cfg.b, cfg.voting)
    votes = np.stack([o[3] for o in outputs])
    classifiers = [ClassifierSpec(left, right, float(ari), float(w))
                   for (left, right, ari, _), w in zip(outputs, weights)]
    decisions = weighted_vote_matrix(votes, weights, ds.class_count)
    zeta = np.sum(votes != truth, axis=0)
    entropy = entropy_measure(zeta, count) if count >= 2 else None
    return EnsembleResult(
        predictions=decisions,
        truth=truth,
        classifiers=classifiers,
        diversity=DiversityReport(zeta, count, entropy),
        accuracy=float(np.mean(decisions == truth)),
        test_votes=votes,
        basis=basis,
        class_count=ds.class_count,
    )


# ---- classifier table ----------------------------------------------------

def _fmt_indices(idx):
    return "-" if idx is None else ",".join(str(i) for i in idx)


def classifier_table(classifiers) -> str:
    lines = ["# left right ari weight"]
    for c in classifiers:
        lines.append(f"{_fmt_indices(c.left_indices)} {_fmt_indices(c.right_indices)} {c.ari!r} {c.weight!r}")
    return "\n".join(lines) + "\n"


def parse_classifier_table(text: str) -> list:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise MalformedHeader(f"classifier table line {lineno}: expected 4 fields")
        left, right = (None if p == "-" else tuple(int(i) for i in p.split(",")) for p in parts[:2])
        out.append(ClassifierSpec(left, right, float(parts[2]), float(parts[3])))
    return out


def save_ensemble(result: EnsembleResult, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "basis.bin").write_bytes(dump_basis(result.basis))
    with open(out_dir / "classifiers.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(classifier_table(result.classifiers))
    return out_dir
