"""Instance-level and cluster-level contrastive objectives with entropy regularization.

Both contrastive terms share one kernel: rows of ``A`` and ``B`` are paired
positives (row ``i`` of ``A`` with row ``i`` of ``B``), every other row of the
stacked ``[A; B]`` is a negative. By default the anchor's similarity with itself
stays in the denominator, exactly as the objective is printed; pass
``exclude_self=True`` for the usual NT-Xent form.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidConfig, InvalidTemperature, TooFewInstances
from .numerics import l2_normalize_rows, l2_normalize_rows_backward, logsumexp_rows


@dataclass
class LossBreakdown:
    l_instance: float
    l_cluster_contrastive: float
    entropy: float
    l_cluster: float
    total: float

    @classmethod
    def from_components(cls, l_instance, l_cluster_contrastive, entropy):
        l_cluster = l_cluster_contrastive - entropy
        return cls(float(l_instance), float(l_cluster_contrastive), float(entropy),
                   float(l_cluster), float(l_instance + l_cluster))

    def to_dict(self):
        return asdict(self)


def _check_tau(tau):
    if not tau > 0:
        raise InvalidTemperature(f"temperature must be > 0, got {tau}")


def paired_contrastive(A, B, tau, exclude_self=False, with_grad=False):
    """Mean over all ``2P`` anchors of ``-log softmax`` at the positive.

    Similarities are cosine similarities of the rows. Returns the loss, or
    ``(loss, dA, dB)`` when ``with_grad`` is set.
    """
    P = A.shape[0]
    X = np.concatenate([A, B], axis=0)
    U, norms = l2_normalize_rows(X)
    S = (U @ U.T) / tau
    rows = np.arange(2 * P)
    pos = (rows + P) % (2 * P)
    if exclude_self:
        S[rows, rows] = -np.inf
    lse = logsumexp_rows(S)
    loss = np.sum(lse - S[rows, pos]) / (2 * P)
    if not with_grad:
        return loss
    G = np.exp(S - lse[:, None])
    G[rows, pos] -= 1.0
    G /= 2 * P
    dU = ((G + G.T) @ U) / tau
    dX = l2_normalize_rows_backward(dU, U, norms)
    return loss, dX[:P], dX[P:]


def instance_loss(Z_a, Z_b, tau_instance, exclude_self=False):
    _check_tau(tau_instance)
    if Z_a.shape[0] < 2:
        raise TooFewInstances(f"instance loss needs N >= 2, got {Z_a.shape[0]}")
    return float(paired_contrastive(Z_a, Z_b, tau_instance, exclude_self))


def cluster_contrastive(C_a, C_b, tau_cluster, exclude_self=False):
    _check_tau(tau_cluster)
    if C_a.shape[1] < 2:
        raise InvalidConfig(f"cluster loss needs M >= 2, got {C_a.shape[1]}")
    return float(paired_contrastive(C_a.T, C_b.T, tau_cluster, exclude_self))


def _plogp(p):
    safe = np.where(p > 0, p, 1.0)
    return np.where(p > 0, p * np.log(safe), 0.0)


def assignment_entropy(C_a, C_b, with_grad=False):
    """Entropy of the batch-mean cluster distribution, summed over both views."""
    p_a = C_a.mean(axis=0)
    p_b = C_b.mean(axis=0)
    H = -(np.sum(_plogp(p_a)) + np.sum(_plogp(p_b)))
    if not with_grad:
        return float(H)

    def grad(C, p):
        log_p = np.log(np.where(p > 0, p, 1.0))
        g = np.where(p > 0, -(log_p + 1.0), 0.0) / C.shape[0]
        return np.broadcast_to(g, C.shape).copy()

    return float(H), grad(C_a, p_a), grad(C_b, p_b)


def total_loss(Z_a, Z_b, C_a, C_b, tau_instance, tau_cluster, exclude_self=False) -> LossBreakdown:
    return LossBreakdown.from_components(
        instance_loss(Z_a, Z_b, tau_instance, exclude_self),
        cluster_contrastive(C_a, C_b, tau_cluster, exclude_self),
        assignment_entropy(C_a, C_b),
    )


def total_loss_and_grads(Z_a, Z_b, C_a, C_b, tau_instance, tau_cluster, exclude_self=False):
    """Loss breakdown plus gradients of ``total`` w.r.t. ``(Z_a, Z_b, C_a, C_b)``."""
    _check_tau(tau_instance)
    _check_tau(tau_cluster)
    if Z_a.shape[0] < 2:
        raise TooFewInstances(f"instance loss needs N >= 2, got {Z_a.shape[0]}")
    if C_a.shape[1] < 2:
        raise InvalidConfig(f"cluster loss needs M >= 2, got {C_a.shape[1]}")
    l_i, dZ_a, dZ_b = paired_contrastive(Z_a, Z_b, tau_instance, exclude_self, with_grad=True)
    l_c, dCt_a, dCt_b = paired_contrastive(C_a.T, C_b.T, tau_cluster, exclude_self, with_grad=True)
    ent, dH_a, dH_b = assignment_entropy(C_a, C_b, with_grad=True)
    breakdown = LossBreakdown.from_components(l_i, l_c, ent)
    dC_a = (dCt_a.T - dH_a).astype(C_a.dtype, copy=False)
    dC_b = (dCt_b.T - dH_b).astype(C_b.dtype, copy=False)
    return breakdown, dZ_a, dZ_b, dC_a, dC_b
