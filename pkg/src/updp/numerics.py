"""Forward/backward numerical primitives for the fixed graph, and a gradient checker."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteLoss, ZeroVector

EPS_NORM = 1e-12


def l2_normalize(v):
    v = np.asarray(v, dtype=float)
    norm = np.sqrt(np.sum(v * v))
    if not norm > EPS_NORM:
        raise ZeroVector(f"cannot normalize vector with norm {norm:g}")
    return v / norm


def l2_normalize_rows(M):
    """Row-normalize ``M``; returns ``(unit_rows, norms)`` so the backward pass can reuse them."""
    norms = np.sqrt(np.sum(M * M, axis=1))
    if M.shape[0] and not np.all(norms > EPS_NORM):
        bad = int(np.argmin(norms))
        raise ZeroVector(f"row {bad} has norm {norms[bad]:g}")
    return M / norms[:, None], norms


def l2_normalize_rows_backward(d_out, unit, norms):
    # d/dx (x/|x|) = (I - u u^T) / |x|
    radial = np.sum(d_out * unit, axis=1, keepdims=True)
    return (d_out - unit * radial) / norms[:, None]


def cosine_sim_matrix(A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    An, _ = l2_normalize_rows(A)
    Bn, _ = l2_normalize_rows(B)
    return An @ Bn.T


def softmax_rows(M):
    M = np.asarray(M)
    shifted = M - M.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_backward(d_out, P):
    return P * (d_out - np.sum(d_out * P, axis=1, keepdims=True))


def logsumexp_rows(M):
    m = M.max(axis=1, keepdims=True)
    return (m + np.log(np.sum(np.exp(M - m), axis=1, keepdims=True)))[:, 0]


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(d_out, pre):
    return d_out * (pre > 0)


def affine(X, W, b):
    """``X @ W.T + b`` with ``W`` stored as (out, in)."""
    return X @ W.T + b


def affine_backward(d_out, X, W):
    """Returns ``(dX, dW, db)`` for :func:`affine`."""
    return d_out @ W, d_out.T @ X, d_out.sum(axis=0)


@dataclass
class GradCheckReport:
    max_relative_error: float
    worst_parameter_index: int
    eps: float
    analytic: np.ndarray | None = None
    numeric: np.ndarray | None = None

    def passed(self, tol: float) -> bool:
        return self.max_relative_error < tol


def finite_diff_check(
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    params,
    eps: float = 1e-6,
) -> GradCheckReport:
    """Compare ``loss_fn``'s analytic gradient against central differences.

    ``loss_fn(theta)`` must return ``(loss, grad)``. The relative error per
    coordinate uses ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    theta = np.array(params, dtype=np.float64).ravel()
    f0, grad = loss_fn(theta.copy())
    if not np.isfinite(f0):
        raise NonFiniteLoss("loss is not finite at the base point")
    analytic = np.asarray(grad, dtype=np.float64).ravel()
    numeric = np.zeros_like(theta)
    for i in range(theta.size):
        probe = theta.copy()
        probe[i] = theta[i] + eps
        f_plus, _ = loss_fn(probe)
        probe[i] = theta[i] - eps
        f_minus, _ = loss_fn(probe)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteLoss(f"non-finite loss probing coordinate {i}")
        numeric[i] = (f_plus - f_minus) / (2.0 * eps)
    if theta.size == 0:
        return GradCheckReport(0.0, -1, eps, analytic, numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    rel = np.abs(analytic - numeric) / denom
    worst = int(np.argmax(rel))
    return GradCheckReport(float(rel[worst]), worst, eps, analytic, numeric)
