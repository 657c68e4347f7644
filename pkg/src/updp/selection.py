"""Single-pass budgeted selection: cluster confidence, cluster medoids, and baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import base_features
from .errors import BudgetExceedsDataset, InvalidConfig
from .model import ModelState, encode
from .numerics import l2_normalize_rows
from .seeding import stream

TIE_TOL = 1e-12
STRATEGIES = ("random", "confidence", "medoid-f", "medoid-z", "kmeans-i", "kmeans-m")


@dataclass
class ClusterAssignment:
    soft: np.ndarray
    hard: np.ndarray
    confidence: np.ndarray

    @classmethod
    def from_soft(cls, soft) -> ClusterAssignment:
        soft = np.asarray(soft)
        hard = np.argmax(soft, axis=1)  # first maximum wins ties
        conf = soft[np.arange(soft.shape[0]), hard]
        return cls(soft, hard, conf)

    @property
    def num_clusters(self) -> int:
        return self.soft.shape[1]


@dataclass
class SelectionResult:
    strategy: str
    budget: int
    indices: list = field(default_factory=list)
    provenance: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"strategy": self.strategy, "budget": self.budget,
                "indices": list(self.indices), "provenance": list(self.provenance)}

    @classmethod
    def from_dict(cls, d) -> SelectionResult:
        return cls(d["strategy"], int(d["budget"]), [int(i) for i in d["indices"]], list(d["provenance"]))


def _check_budget(budget, n):
    if budget < 1:
        raise InvalidConfig(f"budget must be >= 1, got {budget}")
    if budget > n:
        raise BudgetExceedsDataset(f"budget {budget} exceeds dataset size {n}")


def assign_clusters(model: ModelState, dataset) -> ClusterAssignment:
    """Cluster-head assignment on un-augmented features."""
    _, _, C = encode(model, base_features(dataset))
    return ClusterAssignment.from_soft(C.astype(np.float64))


def _kept_clusters(hard, budget):
    """Nonempty cluster ids, trimmed to the ``budget`` largest (ties: lower id), in id order."""
    ids, sizes = np.unique(hard, return_counts=True)
    if ids.size > budget:
        order = np.lexsort((ids, -sizes))[:budget]
        ids = np.sort(ids[order])
    return ids


def _best(scores, members, lower_is_better=False):
    s = scores[members]
    pick = np.argmin(s) if lower_is_better else np.argmax(s)
    return int(members[pick]), float(s[pick])


def _fill(result, assignment, budget, strategy):
    """Top up with the highest-confidence unselected instances (ties: lowest index)."""
    missing = budget - len(result.indices)
    if missing <= 0:
        return
    taken = np.zeros(assignment.hard.size, dtype=bool)
    taken[result.indices] = True
    candidates = np.flatnonzero(~taken)
    order = candidates[np.lexsort((candidates, -assignment.confidence[candidates]))][:missing]
    for i in order:
        result.indices.append(int(i))
        result.provenance.append({"strategy": strategy, "cluster_id": int(assignment.hard[i]),
                                  "score": float(assignment.confidence[i]), "fill": True})


def select_confidence(assignment: ClusterAssignment, budget: int) -> SelectionResult:
    n = assignment.hard.size
    _check_budget(budget, n)
    result = SelectionResult("confidence", budget)
    for k in _kept_clusters(assignment.hard, budget):
        members = np.flatnonzero(assignment.hard == k)
        i, score = _best(assignment.confidence, members)
        result.indices.append(i)
        result.provenance.append({"strategy": "confidence", "cluster_id": int(k), "score": score, "fill": False})
    _fill(result, assignment, budget, "confidence")
    return result


def medoid(features) -> tuple[int, float]:
    """Position of the member with minimal mean cosine dissimilarity, and that mean.

    Scores within ``TIE_TOL`` of the minimum count as tied.
    """
    U, _ = l2_normalize_rows(np.asarray(features, dtype=np.float64))
    dissim = 1.0 - U @ U.T
    scores = dissim.mean(axis=1)
    # ties (duplicates, symmetric layouts) go to the lowest position despite rounding noise
    pos = int(np.flatnonzero(scores <= scores.min() + TIE_TOL)[0])
    return pos, float(scores[pos])


def select_medoid(features, assignment: ClusterAssignment, budget: int, strategy: str = "medoid-f") -> SelectionResult:
    features = np.asarray(features)
    n = assignment.hard.size
    if features.shape[0] != n:
        raise InvalidConfig(f"features have {features.shape[0]} rows, assignment has {n}")
    _check_budget(budget, n)
    result = SelectionResult(strategy, budget)
    for k in _kept_clusters(assignment.hard, budget):
        members = np.flatnonzero(assignment.hard == k)
        pos, score = medoid(features[members])
        result.indices.append(int(members[pos]))
        result.provenance.append({"strategy": strategy, "cluster_id": int(k), "score": score, "fill": False})
    _fill(result, assignment, budget, strategy)
    return result


def select_random(dataset_or_n, budget: int, seed: int) -> SelectionResult:
    n = dataset_or_n if isinstance(dataset_or_n, (int, np.integer)) else dataset_or_n.count
    _check_budget(budget, n)
    idx = stream(seed, "baseline", 0).choice(n, size=budget, replace=False)
    return SelectionResult("random", budget, [int(i) for i in idx],
                           [{"strategy": "random", "cluster_id": -1, "score": 0.0, "fill": False} for _ in idx])


def kmeans(X, k: int, seed: int, max_iter: int = 100, tol: float = 1e-6):
    """Lloyd's algorithm with k-means++ seeding; returns ``(labels, centers)``.

    An emptied cluster is re-seeded at the point farthest from its current center.
    """
    rng = stream(seed, "baseline", 1)
    n = X.shape[0]
    sq = np.sum(X * X, axis=1)

    def dist2(C):
        return np.maximum(sq[:, None] - 2 * X @ C.T + np.sum(C * C, axis=1)[None, :], 0.0)

    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = dist2(centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        i = rng.choice(n, p=closest / total) if total > 0 else rng.integers(n)
        centers[c] = X[i]
        closest = np.minimum(closest, dist2(centers[c:c + 1])[:, 0])

    prev = np.inf
    for _ in range(max_iter):
        D = dist2(centers)
        labels = np.argmin(D, axis=1)
        d_own = D[np.arange(n), labels]
        sizes = np.bincount(labels, minlength=k)
        for c in np.flatnonzero(sizes == 0):
            # farthest point among those whose cluster can spare one
            movable = np.where(sizes[labels] > 1, d_own, -1.0)
            far = int(np.argmax(movable))
            if movable[far] < 0:
                break
            sizes[labels[far]] -= 1
            sizes[c] += 1
            labels[far] = c
            d_own[far] = 0.0
        for c in np.flatnonzero(sizes):
            centers[c] = X[labels == c].mean(axis=0)
        inertia = float(np.sum(dist2(centers)[np.arange(n), labels]))
        if prev < np.inf and abs(prev - inertia) <= tol * max(prev, 1e-300):
            break
        prev = inertia
    return labels, centers


def select_kmeans_medoid(features, budget: int, seed: int, strategy: str = "kmeans-i") -> SelectionResult:
    """Baseline: k-means on L2-normalized features (k = budget), then one medoid per cluster."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    _check_budget(budget, n)
    U, _ = l2_normalize_rows(features)
    labels, _ = kmeans(U, budget, seed)
    result = SelectionResult(strategy, budget)
    for k in np.unique(labels):
        members = np.flatnonzero(labels == k)
        pos, score = medoid(U[members])
        result.indices.append(int(members[pos]))
        result.provenance.append({"strategy": strategy, "cluster_id": int(k), "score": score, "fill": False})
    if len(result.indices) < budget:
        taken = set(result.indices)
        for i in range(n):
            if len(result.indices) == budget:
                break
            if i not in taken:
                result.indices.append(i)
                result.provenance.append({"strategy": strategy, "cluster_id": int(labels[i]),
                                          "score": 0.0, "fill": True})
    return result


def run_strategy(name: str, model: ModelState | None, dataset, budget: int, seed: int,
                 assignment: ClusterAssignment | None = None, encoded=None) -> SelectionResult:
    """Dispatch one named strategy. ``encoded`` may carry a precomputed ``(H, Z, C)``."""
    if name not in STRATEGIES:
        raise InvalidConfig(f"unknown strategy {name!r}; expected one of {STRATEGIES}")
    if name == "random":
        return select_random(dataset, budget, seed)
    if name == "kmeans-i":
        return select_kmeans_medoid(base_features(dataset), budget, seed, "kmeans-i")
    if model is None:
        raise InvalidConfig(f"strategy {name!r} needs a trained model")
    H, Z, C = encoded if encoded is not None else encode(model, base_features(dataset))
    if name == "kmeans-m":
        return select_kmeans_medoid(H, budget, seed, "kmeans-m")
    assignment = assignment or ClusterAssignment.from_soft(C.astype(np.float64))
    if name == "confidence":
        return select_confidence(assignment, budget)
    return select_medoid(H if name == "medoid-f" else Z, assignment, budget, name)
