"""Downstream scoring of a selection: KNN, linear probe, class balance and coverage.

This is the only module that reads ground-truth labels.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptySelection, LabelOutOfRange, NotEnoughNeighbors, SingleClass
from .numerics import l2_normalize_rows, softmax_rows


@dataclass
class ProbeConfig:
    learning_rate: float = 0.1
    iterations: int = 500
    weight_decay: float = 1e-4


@dataclass
class EvalReport:
    strategy: str
    budget: int
    knn_accuracy: float
    probe_accuracy: float
    kl_balance: float
    class_coverage: float
    class_counts: list

    def to_dict(self):
        return asdict(self)


def knn_accuracy(labeled_feats, labeled_labels, test_feats, test_labels, k: int = 5) -> float:
    """Cosine-distance k-NN majority vote; vote ties go to the smallest class id."""
    labeled_labels = np.asarray(labeled_labels)
    test_labels = np.asarray(test_labels)
    l = labeled_labels.size
    if not 1 <= k <= l:
        raise NotEnoughNeighbors(f"k={k} needs between 1 and {l} labeled points")
    if test_labels.size == 0:
        return 0.0
    A, _ = l2_normalize_rows(np.asarray(labeled_feats, dtype=np.float64))
    B, _ = l2_normalize_rows(np.asarray(test_feats, dtype=np.float64))
    dist = 1.0 - B @ A.T
    # stable sort: equal distances resolve to the lower labeled index
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    K = int(max(labeled_labels.max(), test_labels.max())) + 1
    votes = np.zeros((B.shape[0], K), dtype=np.int64)
    np.add.at(votes, (np.repeat(np.arange(B.shape[0]), k), labeled_labels[nearest].ravel()), 1)
    pred = np.argmax(votes, axis=1)
    return float(np.mean(pred == test_labels))


def fit_linear_probe(feats, labels, num_classes: int, cfg: ProbeConfig | None = None):
    """Multinomial logistic regression by full-batch gradient descent from zero weights."""
    cfg = cfg or ProbeConfig()
    X = np.asarray(feats, dtype=np.float64)
    y = np.asarray(labels)
    n, d = X.shape
    Y = np.zeros((n, num_classes))
    Y[np.arange(n), y] = 1.0
    W = np.zeros((d, num_classes))
    b = np.zeros(num_classes)
    for _ in range(cfg.iterations):
        P = softmax_rows(X @ W + b)
        G = (P - Y) / n
        W -= cfg.learning_rate * (X.T @ G + cfg.weight_decay * W)
        b -= cfg.learning_rate * G.sum(axis=0)
    return W, b


def linear_probe(labeled_feats, labeled_labels, test_feats, test_labels, cfg: ProbeConfig | None = None) -> float:
    """Train a probe on the labeled subset and return its accuracy on the test set.

    Features are L2-normalized first, as is customary for probing embeddings.
    """
    labeled_labels = np.asarray(labeled_labels)
    test_labels = np.asarray(test_labels)
    if np.unique(labeled_labels).size < 2:
        raise SingleClass("linear probe needs at least two distinct classes")
    K = int(max(labeled_labels.max(), test_labels.max() if test_labels.size else 0)) + 1
    Xl, _ = l2_normalize_rows(np.asarray(labeled_feats, dtype=np.float64))
    W, b = fit_linear_probe(Xl, labeled_labels, K, cfg)
    if test_labels.size == 0:
        return 0.0
    Xt, _ = l2_normalize_rows(np.asarray(test_feats, dtype=np.float64))
    pred = np.argmax(Xt @ W + b, axis=1)
    return float(np.mean(pred == test_labels))


def class_counts(selected_labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(selected_labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptySelection("no selected labels")
    if num_classes < 1 or labels.min() < 0 or labels.max() >= num_classes:
        raise LabelOutOfRange(f"labels must lie in [0, {num_classes})")
    return np.bincount(labels, minlength=num_classes)


def kl_balance(selected_labels, num_classes: int) -> float:
    """KL(selected class distribution || uniform), natural log."""
    counts = class_counts(selected_labels, num_classes)
    p = counts / counts.sum()
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] * num_classes)))


def class_coverage(selected_labels, num_classes: int) -> float:
    counts = class_counts(selected_labels, num_classes)
    return float(np.count_nonzero(counts) / num_classes)


def evaluate_selection(selection, feats, labels, num_classes: int, knn_k: int = 5,
                       probe_cfg: ProbeConfig | None = None) -> EvalReport:
    """Score a selection: labeled = the selected instances, test = everything else."""
    labels = np.asarray(labels)
    idx = np.asarray(selection.indices, dtype=np.int64)
    rest = np.setdiff1d(np.arange(labels.size), idx)
    sel_labels = labels[idx]
    k = knn_k if idx.size >= knn_k else 1
    knn = knn_accuracy(feats[idx], sel_labels, feats[rest], labels[rest], k)
    if np.unique(sel_labels).size > 1:
        probe = linear_probe(feats[idx], sel_labels, feats[rest], labels[rest], probe_cfg)
    else:
        # a one-class probe can only ever predict that class
        probe = float(np.mean(labels[rest] == sel_labels[0])) if rest.size else 0.0
    counts = class_counts(sel_labels, num_classes)
    return EvalReport(
        strategy=selection.strategy,
        budget=selection.budget,
        knn_accuracy=knn,
        probe_accuracy=probe,
        kl_balance=kl_balance(sel_labels, num_classes),
        class_coverage=class_coverage(sel_labels, num_classes),
        class_counts=[int(c) for c in counts],
    )
