"""Clustering losses over batch probabilities, each with its exact gradient.

The clustering objective is the difference between the mean per-row entropy
(confidence term) and the entropy of the batch-mean distribution (balance
term); minimizing it maximizes the mutual information between inputs and
induced labels.  A pairwise KL term pulls mined together-pairs onto the
same prediction.  All logarithms are natural and floored at LOG_FLOOR to
keep confident predictions finite.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "LOG_FLOOR",
    "LossValue",
    "conditional_entropy",
    "marginal_entropy",
    "mi_loss",
    "pairwise_kl_loss",
    "overall_loss",
]

LOG_FLOOR = 1e-12


class LossValue(NamedTuple):
    value: float
    grad: np.ndarray


def _floored_log(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, LOG_FLOOR))


def conditional_entropy(probs: np.ndarray) -> LossValue:
    """Mean per-row entropy (1/N_B) sum_i h(p_i), with 0 * log 0 = 0."""
    probs = np.asarray(probs, dtype=np.float64)
    n = probs.shape[0]
    logp = _floored_log(probs)
    value = float(-(probs * logp).sum() / n)
    # d(p log p)/dp = log p + 1 above the floor, log(floor) below it.
    grad = -(logp + (probs > LOG_FLOOR)) / n
    return LossValue(value, grad)


def marginal_entropy(probs: np.ndarray) -> LossValue:
    """Entropy of the row-mean distribution, chained through the mean."""
    probs = np.asarray(probs, dtype=np.float64)
    n = probs.shape[0]
    mean = probs.mean(axis=0)
    logm = _floored_log(mean)
    value = float(-(mean * logm).sum())
    row_grad = -(logm + (mean > LOG_FLOOR)) / n
    grad = np.broadcast_to(row_grad, probs.shape).copy()
    return LossValue(value, grad)


def mi_loss(probs: np.ndarray) -> LossValue:
    """Confidence term minus balance term; minimum -ln K, maximum ln K."""
    cond = conditional_entropy(probs)
    marg = marginal_entropy(probs)
    return LossValue(cond.value - marg.value, cond.grad - marg.grad)


def pairwise_kl_loss(probs: np.ndarray, pairs) -> LossValue:
    """Mean over (i, j) pairs of KL(p_i || p_j); gradient reaches both rows."""
    probs = np.asarray(probs, dtype=np.float64)
    idx = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
    if idx.size == 0:
        return LossValue(0.0, np.zeros_like(probs))
    n = probs.shape[0]
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError(f"pair index out of range for batch of {n}")
    count = idx.shape[0]
    pi = probs[idx[:, 0]]
    pj = probs[idx[:, 1]]
    log_pi = _floored_log(pi)
    log_pj = _floored_log(pj)
    value = float((pi * (log_pi - log_pj)).sum() / count)
    grad = np.zeros_like(probs)
    grad_i = (log_pi - log_pj + (pi > LOG_FLOOR)) / count
    grad_j = -np.where(pj > LOG_FLOOR, pi / np.maximum(pj, LOG_FLOOR), 0.0) / count
    np.add.at(grad, idx[:, 0], grad_i)
    np.add.at(grad, idx[:, 1], grad_j)
    return LossValue(value, grad)


def overall_loss(probs: np.ndarray, pairs, lam: float) -> LossValue:
    """lam * pairwise KL + clustering loss, gradients summed."""
    mi = mi_loss(probs)
    if lam == 0.0:
        return mi
    pk = pairwise_kl_loss(probs, pairs)
    return LossValue(lam * pk.value + mi.value, lam * pk.grad + mi.grad)
