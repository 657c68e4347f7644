"""Feature-space view generation for the contrastive objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPolicy, NotEnoughViews
from .seeding import stream

KINDS = ("precomputed", "jitter", "dropout")


@dataclass(frozen=True)
class AugmentPolicy:
    """How the two views of each instance are produced.

    ``noise_sigma=None`` means dataset-adaptive jitter: 0.1 times the
    per-dimension standard deviation of the stored features.
    """

    kind: str = "jitter"
    noise_sigma: float | None = None
    drop_prob: float = 0.1
    seed: int | None = None  # None: inherit the experiment seed

    def validate(self):
        if self.kind not in KINDS:
            raise InvalidPolicy(f"unknown augmentation kind {self.kind!r}; expected one of {KINDS}")
        if self.noise_sigma is not None and not self.noise_sigma >= 0:
            raise InvalidPolicy(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= self.drop_prob < 1:
            raise InvalidPolicy(f"drop_prob must be in [0, 1), got {self.drop_prob}")


def base_features(dataset):
    """Un-augmented features: the mean over stored views (N x D)."""
    return dataset.features.mean(axis=1)


def _jitter_scale(dataset, policy):
    if policy.noise_sigma is not None:
        return np.full(dataset.dim, policy.noise_sigma)
    return 0.1 * dataset.feature_std


def make_views(dataset, policy: AugmentPolicy, epoch: int, batch_indices):
    """Two augmented views ``(X_a, X_b)`` of the instances in ``batch_indices``.

    Randomness is drawn per epoch for the whole dataset and then indexed, so a
    given instance gets the same views in an epoch regardless of batching.
    """
    policy.validate()
    idx = np.asarray(batch_indices, dtype=np.int64)
    N, V, D = dataset.count, dataset.views, dataset.dim
    rng = stream(policy.seed or 0, "augment", epoch)
    if policy.kind == "precomputed":
        if V < 2:
            raise NotEnoughViews(f"precomputed views need V >= 2, dataset has V={V}")
        first = rng.integers(0, V, size=N)
        second = (first + rng.integers(1, V, size=N)) % V
        feats = dataset.features
        return (feats[idx, first[idx]].astype(np.float64),
                feats[idx, second[idx]].astype(np.float64))

    x = base_features(dataset)[idx].astype(np.float64)
    if policy.kind == "jitter":
        scale = _jitter_scale(dataset, policy)
        noise = rng.standard_normal((2, N, D))[:, idx]
        return x + scale * noise[0], x + scale * noise[1]

    keep_prob = 1.0 - policy.drop_prob
    masks = rng.random((2, N, D))[:, idx] < keep_prob
    return x * masks[0] / keep_prob, x * masks[1] / keep_prob
