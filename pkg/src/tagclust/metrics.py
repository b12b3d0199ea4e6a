"""Explanation-quality metrics (tag coverage, inverse tag frequency) and
clustering-quality metrics (NMI, optimal-matching accuracy).

Tag coverage is computed on raw observed tags: for each descriptor the
ratio counts only members whose annotation for that tag is present, so
imputation artifacts never inflate the score.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "MetricReport",
    "tag_coverage",
    "inverse_tag_frequency",
    "nmi",
    "clustering_accuracy",
    "explanation_quality",
]


@dataclass
class MetricReport:
    tc: list[float] | None = None
    itf: list[float] | None = None
    nmi: float | None = None
    acc: float | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "nmi": self.nmi,
            "acc": self.acc,
            "per_cluster_tc": self.tc,
            "per_cluster_itf": self.itf,
        }


def tag_coverage(member_tags: np.ndarray, descriptors) -> float:
    """Mean over descriptor tags of (observed-present count / observed count).

    member_tags are the raw rows (NaN = missing) of one cluster's members.
    A descriptor missing for every member contributes ratio 0 with a warning.
    """
    member_tags = np.asarray(member_tags, dtype=np.float64)
    descriptors = list(descriptors)
    if not descriptors:
        raise ValueError("descriptor set is empty")
    if member_tags.shape[0] == 0:
        raise ValueError("cluster has no members")
    ratios = []
    for d in descriptors:
        column = member_tags[:, d]
        observed = ~np.isnan(column)
        if not observed.any():
            warnings.warn(f"tag {d} unobserved for every member; counted as 0",
                          stacklevel=2)
            ratios.append(0.0)
        else:
            ratios.append(float((column[observed] == 1.0).sum() / observed.sum()))
    return float(np.mean(ratios))


def inverse_tag_frequency(descriptor_sets, cluster_index: int) -> float:
    """Mean log2-rarity of one cluster's descriptors across all clusters."""
    sets = [set(s) for s in descriptor_sets]
    k = len(sets)
    own = sets[cluster_index]
    if not own:
        raise ValueError(f"cluster {cluster_index} has an empty descriptor set")
    total = 0.0
    for d in own:
        used_by = sum(1 for s in sets if d in s)
        total += np.log2(k / used_by)
    return float(total / len(own))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """I(pred; truth) / sqrt(H(pred) * H(truth)) from empirical counts.

    Returns 1.0 when the partitions are identical up to relabeling, 0.0 when
    either partition is constant while the other is not.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError("label arrays differ in length")
    n = pred.shape[0]
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    kp, kt = pi.max() + 1, ti.max() + 1
    joint = np.zeros((kp, kt))
    np.add.at(joint, (pi, ti), 1.0)
    hp = _entropy(joint.sum(axis=1))
    ht = _entropy(joint.sum(axis=0))
    if hp == 0.0 or ht == 0.0:
        # A constant partition carries no information; identical-up-to-relabel
        # pairs are perfect matches by convention.
        return 1.0 if hp == ht == 0.0 else 0.0
    pj = joint / n
    outer = np.outer(joint.sum(axis=1), joint.sum(axis=0)) / (n * n)
    nz = pj > 0
    mi = float((pj[nz] * np.log(pj[nz] / outer[nz])).sum())
    return float(min(1.0, max(0.0, mi / np.sqrt(hp * ht))))


def clustering_accuracy(pred, truth) -> float:
    """Best one-to-one cluster/class matching fraction, via optimal assignment."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError("label arrays differ in length")
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    confusion = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(confusion, (pi, ti), 1)
    rows, cols = linear_sum_assignment(-confusion)
    return float(confusion[rows, cols].sum() / pred.shape[0])


def explanation_quality(tag_entries: np.ndarray, assignment, descriptor_sets):
    """Per-cluster (tc, itf) lists for a clustering and its descriptor sets."""
    labels = np.asarray(assignment, dtype=np.int64)
    tc = []
    itf = []
    for i, _ in enumerate(descriptor_sets):
        members = tag_entries[labels == i]
        tc.append(tag_coverage(members, descriptor_sets[i]))
        itf.append(inverse_tag_frequency(descriptor_sets, i))
    return tc, itf
