"""Embedding datasets: in-memory type, the EMB1 binary format, and a synthetic generator.

EMB1 layout (little-endian)::

    b"EMB1" | u32 N | u32 D | u32 V | u8 has_labels | u32 K
    N*V*D float32 in [instance][view][dim] order
    N int32 labels (only if has_labels)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    InvalidConfig,
    InvalidDim,
    IoError,
    LabelOutOfRange,
    NonFiniteFeature,
    TruncatedFile,
)
from .seeding import stream

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sIIIBI")


@dataclass(eq=False)
class EmbeddingDataset:
    features: np.ndarray  # (N, V, D) float32
    labels: np.ndarray | None = None
    num_classes: int = 0

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype="<f4")
        if self.features.ndim != 3:
            raise InvalidDim(f"features must be (N, V, D), got shape {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise NonFiniteFeature("features contain NaN or Inf")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype="<i4")
            if self.labels.shape != (self.count,):
                raise InvalidDim(f"labels must have shape ({self.count},), got {self.labels.shape}")
            if self.num_classes == 0 and self.count:
                self.num_classes = int(self.labels.max()) + 1
            if self.count and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
                raise LabelOutOfRange(f"labels must lie in [0, {self.num_classes})")

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def views(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    @cached_property
    def feature_std(self) -> np.ndarray:
        return self.features.reshape(-1, self.dim).astype(np.float64).std(axis=0)

    def without_labels(self) -> EmbeddingDataset:
        return EmbeddingDataset(self.features.copy(), None, 0)


def save_dataset(dataset: EmbeddingDataset, path) -> None:
    N, V, D = dataset.features.shape
    if V == 0:
        raise InvalidDim("datasets with zero views cannot be saved")
    has_labels = dataset.labels is not None
    header = _HEADER.pack(MAGIC, N, D, V, int(has_labels), dataset.num_classes if has_labels else 0)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(dataset.features.astype("<f4").tobytes())
            if has_labels:
                fh.write(dataset.labels.astype("<i4").tobytes())
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_dataset(path) -> EmbeddingDataset:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: not an EMB1 file")
    if len(raw) < _HEADER.size:
        raise TruncatedFile(f"{path}: header is {len(raw)} bytes, expected {_HEADER.size}")
    _, N, D, V, has_labels, K = _HEADER.unpack_from(raw)
    if V == 0:
        raise InvalidDim(f"{path}: V must be >= 1")
    if has_labels not in (0, 1):
        raise BadMagic(f"{path}: has_labels flag must be 0 or 1, got {has_labels}")
    n_feat = N * V * D
    expected = _HEADER.size + 4 * n_feat + (4 * N if has_labels else 0)
    if len(raw) < expected:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, expected {expected}")
    if len(raw) > expected:
        raise TruncatedFile(f"{path}: {len(raw) - expected} unexpected trailing bytes")
    feats = np.frombuffer(raw, dtype="<f4", count=n_feat, offset=_HEADER.size).reshape(N, V, D)
    if not np.all(np.isfinite(feats)):
        raise NonFiniteFeature(f"{path}: features contain NaN or Inf")
    labels = None
    if has_labels:
        labels = np.frombuffer(raw, dtype="<i4", count=N, offset=_HEADER.size + 4 * n_feat)
        if N and (labels.min() < 0 or labels.max() >= K):
            raise LabelOutOfRange(f"{path}: labels must lie in [0, {K})")
    return EmbeddingDataset(feats.copy(), None if labels is None else labels.copy(), K if has_labels else 0)


@dataclass(frozen=True)
class SynthConfig:
    num_classes: int = 10
    per_class: int = 200
    dim: int = 32
    separation: float = 10.0
    sigma: float = 1.0
    subclusters: int = 1
    subcluster_spread: float = 3.0
    views: int = 1
    view_sigma: float = 0.25
    seed: int = 0

    def validate(self):
        for name in ("num_classes", "per_class", "dim", "subclusters", "views"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1")
        if not self.sigma > 0:
            raise InvalidConfig("sigma must be > 0")
        if self.separation < 0 or self.subcluster_spread < 0 or self.view_sigma < 0:
            raise InvalidConfig("separation, subcluster_spread and view_sigma must be >= 0")

    def with_seed(self, seed: int) -> SynthConfig:
        return replace(self, seed=seed)


def _unit_rows(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def synth_generate(cfg: SynthConfig) -> EmbeddingDataset:
    """Gaussian class mixture with optional sub-clusters per class.

    Instance order is shuffled so that index order carries no label information.
    """
    cfg.validate()
    rng = stream(cfg.seed, "synth")
    K, D, S = cfg.num_classes, cfg.dim, cfg.subclusters
    class_means = cfg.separation * _unit_rows(rng, K, D)
    if S > 1:
        sub_means = class_means[:, None, :] + cfg.subcluster_spread * _unit_rows(rng, K * S, D).reshape(K, S, D)
    else:
        sub_means = class_means[:, None, :]
    labels = np.repeat(np.arange(K), cfg.per_class)
    sub = np.tile(np.arange(cfg.per_class) % S, K)
    points = sub_means[labels, sub] + cfg.sigma * rng.standard_normal((labels.size, D))
    feats = points[:, None, :] + cfg.view_sigma * rng.standard_normal((labels.size, cfg.views, D))
    order = rng.permutation(labels.size)
    return EmbeddingDataset(feats[order].astype(np.float32), labels[order].astype(np.int32), K)
