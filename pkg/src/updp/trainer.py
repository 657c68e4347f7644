"""Minibatch Adam over the prompt and both heads; the fuser stays frozen."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .augment import AugmentPolicy, make_views
from .errors import BatchTooSmall, InvalidConfig, NonFiniteGradient, TooFewInstances
from .losses import LossBreakdown, total_loss_and_grads
from .model import DTYPES, ModelConfig, ModelState, backward, forward, init_model
from .seeding import stream


@dataclass(frozen=True)
class TrainConfig:
    tau_instance: float = 0.5
    tau_cluster: float = 1.0
    learning_rate: float = 3e-4
    batch_size: int = 256
    epochs: int = 150
    context_length: int = 4
    num_clusters: int | None = None  # None: use the annotation budget
    exclude_self: bool = False
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    precision: str = "f32"
    d_w: int = 16
    d_h: int = 64
    d_z: int = 128
    d_hidden: int | None = None
    fuser_seed: int = 0

    def validate(self):
        if not (self.tau_instance > 0 and self.tau_cluster > 0):
            raise InvalidConfig("temperatures must be > 0")
        if self.batch_size < 2:
            raise InvalidConfig("batch_size must be >= 2")
        if self.epochs < 0:
            raise InvalidConfig("epochs must be >= 0")
        if self.precision not in DTYPES:
            raise InvalidConfig(f"precision must be one of {sorted(DTYPES)}")
        if self.num_clusters is None:
            raise InvalidConfig("num_clusters is unset (no budget to default from)")

    def model_config(self, d_in: int) -> ModelConfig:
        return ModelConfig(
            d_in=d_in, num_clusters=self.num_clusters, context_length=self.context_length,
            d_w=self.d_w, d_h=self.d_h, d_z=self.d_z, d_hidden=self.d_hidden,
            fuser_seed=self.fuser_seed, precision=self.precision,
        )


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"gradient for {name!r} contains NaN or Inf")
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= (cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)).astype(p.dtype)


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    checksum: str = ""

    def totals(self) -> np.ndarray:
        return np.array([b.total for b in self.losses])

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {"epochs": [b.to_dict() for b in self.losses], "checksum": self.checksum}
        if include_timing:
            out["wall_time"] = list(self.wall_time)
        return out


def epoch_batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Shuffled minibatches; a trailing batch of one is merged into its predecessor."""
    if n < 2:
        raise BatchTooSmall(f"need at least 2 instances to form a batch, got {n}")
    order = stream(seed, "shuffle", epoch).permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and batches[-1].size == 1:
        last = batches.pop()
        batches[-1] = np.concatenate([batches[-1], last])
    return batches


def train_step(model: ModelState, X_a, X_b, cfg: TrainConfig, state: AdamState) -> LossBreakdown:
    batch, caches = forward(model, X_a, X_b, with_cache=True)
    breakdown, dZ_a, dZ_b, dC_a, dC_b = total_loss_and_grads(
        batch.Z_a, batch.Z_b, batch.C_a, batch.C_b,
        cfg.tau_instance, cfg.tau_cluster, cfg.exclude_self,
    )
    grads = backward(model, caches, dZ_a, dZ_b, dC_a, dC_b)
    adam_step(model.parameters(), grads, state, cfg)
    return breakdown


def train(dataset, cfg: TrainConfig, policy: AugmentPolicy | None = None,
          model: ModelState | None = None, on_epoch_end=None):
    """Train prompt + heads on ``dataset``; returns ``(model, history)``.

    ``on_epoch_end(epoch, model, history)`` is called after every epoch when given.
    """
    cfg.validate()
    if dataset.count == 0:
        raise TooFewInstances("cannot train on an empty dataset")
    policy = policy or AugmentPolicy()
    if policy.seed is None:
        policy = replace(policy, seed=cfg.seed)
    policy.validate()
    if model is None:
        model = init_model(cfg.model_config(dataset.dim), cfg.seed)
    state = AdamState()
    history = TrainHistory()
    keys = list(asdict(LossBreakdown(0, 0, 0, 0, 0)))
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        sums = np.zeros(len(keys))
        batches = epoch_batches(dataset.count, cfg.batch_size, cfg.seed, epoch)
        for idx in batches:
            X_a, X_b = make_views(dataset, policy, epoch, idx)
            b = train_step(model, X_a, X_b, cfg, state)
            sums += [getattr(b, k) for k in keys]
        mean = LossBreakdown(*(float(s) for s in sums / len(batches)))
        if not np.all(np.isfinite(sums)):
            raise NonFiniteGradient(f"non-finite loss in epoch {epoch}")
        history.losses.append(mean)
        history.wall_time.append(time.perf_counter() - start)
        if on_epoch_end is not None:
            on_epoch_end(epoch, model, history)
    history.checksum = model.checksum()
    return model, history
