"""Self-generated together-pair mining within a mini-batch.

For each anchor the score J(i, j) = gamma * L1(tags_i, tags_j) -
L1(probs_i, probs_j) flags instances that look alike in (masked) tag space
but are predicted apart; the l smallest-J partners per anchor become
together-pairs for the KL loss.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

__all__ = ["PairConstraint", "generate_pairs"]


class PairConstraint(NamedTuple):
    anchor: int
    partner: int


def generate_pairs(masked_tags: np.ndarray, probs: np.ndarray,
                   gamma: float, l: int) -> list[PairConstraint]:
    """Mine l together-partners per anchor; ties break to the lowest index.

    l is clamped to batch size - 1; a batch of fewer than 2 instances yields
    no pairs (with a warning).  Self-pairs are excluded.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    masked_tags = np.asarray(masked_tags, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    n = masked_tags.shape[0]
    if probs.shape[0] != n:
        raise ValueError("tag rows and probability rows disagree")
    if n < 2:
        warnings.warn("batch of fewer than 2 instances yields no pairs", stacklevel=2)
        return []
    l_eff = min(l, n - 1)

    scores = gamma * cdist(masked_tags, masked_tags, "cityblock")
    scores -= cdist(probs, probs, "cityblock")
    np.fill_diagonal(scores, np.inf)
    order = np.argsort(scores, axis=1, kind="stable")
    return [
        PairConstraint(anchor, int(partner))
        for anchor in range(n)
        for partner in order[anchor, :l_eff]
    ]
