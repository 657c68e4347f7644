"""Finite-difference verification of the hand-written backward passes."""

from __future__ import annotations

import numpy as np

from .losses import total_loss_and_grads
from .model import ModelConfig, backward, encode, forward, init_model
from .numerics import GradCheckReport, affine, finite_diff_check


def flatten(params: dict) -> np.ndarray:
    return np.concatenate([p.ravel() for p in params.values()])


def unflatten(theta, like: dict) -> dict:
    out, offset = {}, 0
    for name, p in like.items():
        out[name] = theta[offset:offset + p.size].reshape(p.shape).copy()
        offset += p.size
    return out


def model_loss_fn(model, X_a, X_b, tau_instance=0.5, tau_cluster=1.0, exclude_self=False):
    """``theta -> (total loss, gradient)`` over all trainable parameters of ``model``."""
    like = {k: v.copy() for k, v in model.parameters().items()}

    def fn(theta):
        model.set_parameters(unflatten(theta, like))
        batch, caches = forward(model, X_a, X_b, with_cache=True)
        b, dZ_a, dZ_b, dC_a, dC_b = total_loss_and_grads(
            batch.Z_a, batch.Z_b, batch.C_a, batch.C_b, tau_instance, tau_cluster, exclude_self)
        return b.total, flatten(backward(model, caches, dZ_a, dZ_b, dC_a, dC_b))

    return fn, flatten(like)


KINK_MARGIN = 1e-3


def _relu_margin(model, X_a, X_b) -> float:
    """Smallest |pre-activation| of either head's ReLU layer over both views."""
    H = np.concatenate([encode(model, X_a)[0], encode(model, X_b)[0]])
    pres = [affine(H, head.W1, head.b1) for head in (model.instance_head, model.cluster_head)]
    return float(min(np.abs(p).min() for p in pres))


def random_case(seed: int, max_n: int = 8, max_m: int = 4):
    """A small random (model, X_a, X_b) in 64-bit with N <= max_n, M <= max_m.

    Draws are repeated from the same generator until no ReLU pre-activation sits
    within ``KINK_MARGIN`` of zero, where central differences straddle the kink.
    """
    rng = np.random.default_rng(seed)
    while True:
        case = _draw_case(rng, seed, max_n, max_m)
        if _relu_margin(*case) >= KINK_MARGIN:
            return case


def _draw_case(rng, seed, max_n, max_m):
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.integers(2, max_m + 1))
    cfg = ModelConfig(d_in=5, num_clusters=m, context_length=int(rng.integers(1, 5)), d_w=4, d_h=6,
                      d_z=4, d_hidden=7, fuser_seed=seed, precision="f64")
    model = init_model(cfg, seed)
    # a larger prompt than the training init so attention is far from uniform
    model.prompt = rng.standard_normal(model.prompt.shape)
    X_a = rng.standard_normal((n, cfg.d_in))
    X_b = X_a + 0.3 * rng.standard_normal((n, cfg.d_in))
    return model, X_a, X_b


def gradient_suite(num_cases: int = 20, eps: float = 1e-5, exclude_self: bool = False, seed: int = 0
                   ) -> list[GradCheckReport]:
    reports = []
    for i in range(num_cases):
        model, X_a, X_b = random_case(seed + i)
        fn, theta = model_loss_fn(model, X_a, X_b, exclude_self=exclude_self)
        reports.append(finite_diff_check(fn, theta, eps))
    return reports
