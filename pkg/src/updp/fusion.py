"""Frozen prompt-conditioned fuser.

A single cross-attention block: the image feature is the query, the prompt
context vectors are keys and values, and a residual projection of the image
feature is added to the attended output::

    h = W_r x + W_o sum_j alpha_j (W_v v_j),
    alpha = softmax_j(<W_q x, W_k v_j> / temperature)

Only the prompt receives gradients; the weights are read-only arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, InvalidDim
from .numerics import softmax_rows, softmax_rows_backward

WEIGHT_NAMES = ("W_q", "W_k", "W_v", "W_o", "W_r")


@dataclass(frozen=True, eq=False)
class FrozenFuser:
    seed: int
    d_in: int
    d_w: int
    d_h: int
    weights: dict = field(repr=False)
    attention_temperature: float = 1.0

    def weight(self, name, dtype=np.float64):
        w = self.weights[name]
        return w if w.dtype == dtype else w.astype(dtype)

    def checksum(self) -> bytes:
        return b"".join(self.weights[k].tobytes() for k in WEIGHT_NAMES)


def init_fuser(seed: int, d_in: int, d_w: int, d_h: int) -> FrozenFuser:
    for name, width in (("d_in", d_in), ("d_w", d_w), ("d_h", d_h)):
        if int(width) < 1:
            raise InvalidDim(f"{name} must be >= 1, got {width}")
    rng = np.random.default_rng(seed)
    shapes = {
        "W_q": (d_h, d_in),
        "W_k": (d_h, d_w),
        "W_v": (d_h, d_w),
        "W_o": (d_h, d_h),
        "W_r": (d_h, d_in),
    }
    weights = {}
    for name in WEIGHT_NAMES:
        fan_out, fan_in = shapes[name]
        bound = 1.0 / math.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        w.flags.writeable = False
        weights[name] = w
    return FrozenFuser(int(seed), int(d_in), int(d_w), int(d_h), weights, math.sqrt(d_h))


def _check_prompt(fuser, V):
    if V.ndim != 2 or V.shape[0] < 1 or V.shape[1] != fuser.d_w:
        raise DimMismatch(f"prompt must be (n>=1, {fuser.d_w}), got {V.shape}")


def fuse_batch(fuser: FrozenFuser, X, V):
    """Fuse every row of ``X`` (N x d_in) with prompt ``V`` (n x d_w).

    Returns ``(H, cache)``; pass the cache to :func:`fuse_backward`.
    """
    X = np.asarray(X)
    V = np.asarray(V)
    _check_prompt(fuser, V)
    if X.ndim != 2 or X.shape[1] != fuser.d_in:
        raise DimMismatch(f"features must be (N, {fuser.d_in}), got {X.shape}")
    dt = np.result_type(X.dtype, V.dtype)
    W_q, W_k, W_v, W_o, W_r = (fuser.weight(k, dt) for k in WEIGHT_NAMES)
    Q = X @ W_q.T
    K = V @ W_k.T
    Vals = V @ W_v.T
    A = softmax_rows(Q @ K.T / dt.type(fuser.attention_temperature))
    H = X @ W_r.T + (A @ Vals) @ W_o.T
    return H, (Q, K, Vals, A, dt)


def fuse(fuser: FrozenFuser, x, V):
    x = np.asarray(x)
    if x.ndim != 1:
        raise DimMismatch(f"expected a single feature vector, got shape {x.shape}")
    H, _ = fuse_batch(fuser, x[None, :], V)
    return H[0]


def fuse_backward(fuser: FrozenFuser, dH, cache):
    """Gradient of the fused output with respect to the prompt matrix."""
    Q, K, Vals, A, dt = cache
    W_k, W_v, W_o = (fuser.weight(k, dt) for k in ("W_k", "W_v", "W_o"))
    dO = dH @ W_o
    dVals = A.T @ dO
    dS = softmax_rows_backward(dO @ Vals.T, A) / dt.type(fuser.attention_temperature)
    dK = dS.T @ Q
    return dK @ W_k + dVals @ W_v
