"""Trainable state (prompt context, instance head, cluster head) and the batched forward/backward pass."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimMismatch, InvalidConfig
from .fusion import FrozenFuser, fuse_batch, fuse_backward, init_fuser
from .numerics import (
    affine,
    affine_backward,
    l2_normalize_rows,
    l2_normalize_rows_backward,
    relu,
    relu_backward,
    softmax_rows,
    softmax_rows_backward,
)
from .seeding import stream

DTYPES = {"f32": np.float32, "f64": np.float64}


@dataclass(frozen=True)
class ModelConfig:
    d_in: int
    num_clusters: int
    context_length: int = 4
    d_w: int = 16
    d_h: int = 64
    d_z: int = 128
    d_hidden: int | None = None  # defaults to d_h
    fuser_seed: int = 0
    precision: str = "f32"

    @property
    def hidden(self) -> int:
        return self.d_h if self.d_hidden is None else self.d_hidden

    @property
    def dtype(self):
        return DTYPES[self.precision]

    def validate(self):
        widths = dict(d_in=self.d_in, context_length=self.context_length, d_w=self.d_w,
                      d_h=self.d_h, d_z=self.d_z, d_hidden=self.hidden)
        for name, w in widths.items():
            if not isinstance(w, (int, np.integer)) or w < 1:
                raise InvalidConfig(f"{name} must be a positive integer, got {w!r}")
        if self.num_clusters < 2:
            raise InvalidConfig(f"num_clusters must be >= 2, got {self.num_clusters}")
        if self.precision not in DTYPES:
            raise InvalidConfig(f"precision must be one of {sorted(DTYPES)}")


@dataclass
class MlpHead:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    PARAMS = ("W1", "b1", "W2", "b2")

    @property
    def widths(self):
        return [self.W1.shape[1], self.W1.shape[0], self.W2.shape[0]]

    def forward(self, H):
        pre = affine(H, self.W1, self.b1)
        act = relu(pre)
        return affine(act, self.W2, self.b2), (H, pre, act)

    def backward(self, d_out, cache):
        H, pre, act = cache
        d_act, dW2, db2 = affine_backward(d_out, act, self.W2)
        dH, dW1, db1 = affine_backward(relu_backward(d_act, pre), H, self.W1)
        return dH, {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


def _init_head(rng, d_in, d_hidden, d_out, dtype):
    def layer(fan_out, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        return W.astype(dtype), b.astype(dtype)

    W1, b1 = layer(d_hidden, d_in)
    W2, b2 = layer(d_out, d_hidden)
    return MlpHead(W1, b1, W2, b2)


@dataclass
class ModelState:
    config: ModelConfig
    prompt: np.ndarray
    fuser: FrozenFuser = field(repr=False)
    instance_head: MlpHead = field(repr=False)
    cluster_head: MlpHead = field(repr=False)
    rng_seed: int = 0

    @property
    def num_clusters(self) -> int:
        return self.cluster_head.W2.shape[0]

    def parameters(self) -> dict[str, np.ndarray]:
        """Trainable arrays by name (live references). The fuser is never included."""
        params = {"prompt": self.prompt}
        for prefix, head in (("instance", self.instance_head), ("cluster", self.cluster_head)):
            for name in MlpHead.PARAMS:
                params[f"{prefix}.{name}"] = getattr(head, name)
        return params

    def set_parameters(self, params: dict[str, np.ndarray]) -> None:
        self.prompt = params["prompt"]
        for prefix, head in (("instance", self.instance_head), ("cluster", self.cluster_head)):
            for name in MlpHead.PARAMS:
                setattr(head, name, params[f"{prefix}.{name}"])

    def copy(self) -> ModelState:
        heads = [MlpHead(*(getattr(h, n).copy() for n in MlpHead.PARAMS))
                 for h in (self.instance_head, self.cluster_head)]
        return replace(self, prompt=self.prompt.copy(), instance_head=heads[0], cluster_head=heads[1])

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, arr in self.parameters().items():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()


def init_model(cfg: ModelConfig, seed: int) -> ModelState:
    cfg.validate()
    dtype = cfg.dtype
    fuser = init_fuser(cfg.fuser_seed, cfg.d_in, cfg.d_w, cfg.d_h)
    rng = stream(seed, "init")
    prompt = (0.02 * rng.standard_normal((cfg.context_length, cfg.d_w))).astype(dtype)
    inst = _init_head(rng, cfg.d_h, cfg.hidden, cfg.d_z, dtype)
    clus = _init_head(rng, cfg.d_h, cfg.hidden, cfg.num_clusters, dtype)
    return ModelState(cfg, prompt, fuser, inst, clus, int(seed))


@dataclass
class ForwardBatch:
    H_a: np.ndarray
    H_b: np.ndarray
    Z_a: np.ndarray
    Z_b: np.ndarray
    C_a: np.ndarray
    C_b: np.ndarray


def _view_forward(model, X):
    H, fcache = fuse_batch(model.fuser, X, model.prompt)
    Y, icache = model.instance_head.forward(H)
    Z, norms = l2_normalize_rows(Y)
    logits, ccache = model.cluster_head.forward(H)
    C = softmax_rows(logits)
    return (H, Z, C), (fcache, icache, Z, norms, ccache, C)


def encode(model: ModelState, X):
    """Single-view pass on raw features: returns ``(H, Z, C)``."""
    X = np.asarray(X, dtype=model.prompt.dtype)
    if X.ndim != 2 or X.shape[1] != model.fuser.d_in:
        raise DimMismatch(f"features must be (N, {model.fuser.d_in}), got {X.shape}")
    out, _ = _view_forward(model, X)
    return out


def forward(model: ModelState, X_a, X_b, with_cache: bool = False):
    X_a = np.asarray(X_a, dtype=model.prompt.dtype)
    X_b = np.asarray(X_b, dtype=model.prompt.dtype)
    if X_a.shape != X_b.shape:
        raise DimMismatch(f"view shapes differ: {X_a.shape} vs {X_b.shape}")
    if X_a.ndim != 2 or X_a.shape[1] != model.fuser.d_in:
        raise DimMismatch(f"features must be (N, {model.fuser.d_in}), got {X_a.shape}")
    (H_a, Z_a, C_a), cache_a = _view_forward(model, X_a)
    (H_b, Z_b, C_b), cache_b = _view_forward(model, X_b)
    batch = ForwardBatch(H_a, H_b, Z_a, Z_b, C_a, C_b)
    if with_cache:
        return batch, (cache_a, cache_b)
    return batch


def _view_backward(model, cache, dZ, dC, grads):
    fcache, icache, Z, norms, ccache, C = cache
    dH_i, g_inst = model.instance_head.backward(l2_normalize_rows_backward(dZ, Z, norms), icache)
    dH_c, g_clus = model.cluster_head.backward(softmax_rows_backward(dC, C), ccache)
    dV = fuse_backward(model.fuser, dH_i + dH_c, fcache)
    grads["prompt"] += dV
    for name in MlpHead.PARAMS:
        grads[f"instance.{name}"] += g_inst[name]
        grads[f"cluster.{name}"] += g_clus[name]


def backward(model: ModelState, caches, dZ_a, dZ_b, dC_a, dC_b) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every trainable parameter, given its
    gradients w.r.t. the forward outputs ``Z_a, Z_b, C_a, C_b``."""
    grads = {k: np.zeros_like(v) for k, v in model.parameters().items()}
    _view_backward(model, caches[0], dZ_a, dC_a, grads)
    _view_backward(model, caches[1], dZ_b, dC_b, grads)
    return grads


def swap_prompt(model: ModelState, prompt) -> ModelState:
    """Copy of ``model`` using another prompt context (same fuser widths required)."""
    prompt = np.asarray(prompt)
    if prompt.ndim != 2 or prompt.shape[1] != model.fuser.d_w:
        raise DimMismatch(f"prompt must have width {model.fuser.d_w}, got {prompt.shape}")
    out = model.copy()
    out.prompt = prompt.astype(model.prompt.dtype, copy=True)
    return out
