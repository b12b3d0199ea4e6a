"""Cluster-level tag descriptions via a coverage/orthogonality ILP.

Given per-cluster tag coverage Q (K x M), pick the fewest tags such that
every cluster keeps coverage-weighted descriptor mass >= alpha while each
tag's cross-cluster usage stays <= beta.  beta is minimized by a linear
search over non-negative integers; the winning allocation also defines a
diagonal mask that zeroes tag columns unused by any cluster description.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .ilp import Constraint, IlpProblem, IlpSolution, solve

__all__ = [
    "CoverageMatrix",
    "ExplanationResult",
    "EmptyClusterError",
    "InfeasibleCoverageError",
    "compute_coverage",
    "build_explanation_ilp",
    "solve_with_beta_search",
    "apply_mask",
    "explanation_report",
]

_CHECK_TOL = 1e-9


class EmptyClusterError(ValueError):
    def __init__(self, cluster: int):
        self.cluster = cluster
        super().__init__(f"cluster {cluster} has no members")


class InfeasibleCoverageError(ValueError):
    """A cluster cannot reach the coverage level even using every tag."""

    def __init__(self, cluster: int, row_sum: float, alpha: float):
        self.cluster = cluster
        super().__init__(
            f"cluster {cluster} cannot reach coverage {alpha:g}: "
            f"all tags together only give {row_sum:g}"
        )


@dataclass
class CoverageMatrix:
    """q[i, j]: mean imputed value of tag j over members of cluster i."""

    q: np.ndarray
    cluster_sizes: np.ndarray


@dataclass
class ExplanationResult:
    w: np.ndarray                 # K x M binary allocation
    beta_star: int
    descriptors: list[list[int]]  # per cluster, selected tag indices
    mask_diagonal: np.ndarray     # M bits; 1 iff the tag appears in any row

    @property
    def objective(self) -> int:
        return int(self.w.sum())


def compute_coverage(imputed_tags, assignment, k: int) -> CoverageMatrix:
    """Per-cluster mean of imputed tags; every cluster must be non-empty."""
    values = getattr(imputed_tags, "values", imputed_tags)
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(assignment, dtype=np.int64)
    if labels.shape[0] != values.shape[0]:
        raise ValueError("assignment length does not match tag rows")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    q = np.zeros((k, values.shape[1]))
    sizes = np.zeros(k, dtype=np.int64)
    for i in range(k):
        members = labels == i
        sizes[i] = members.sum()
        if sizes[i] == 0:
            raise EmptyClusterError(i)
        q[i] = values[members].mean(axis=0)
    return CoverageMatrix(q=q, cluster_sizes=sizes)


def build_explanation_ilp(coverage: CoverageMatrix, alpha: float, beta: float) -> IlpProblem:
    """K*M binary variables (row-major W), K coverage rows, M overlap columns."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if beta < 0.0:
        raise ValueError("beta must be non-negative")
    q = coverage.q
    k, m = q.shape
    v = k * m
    constraints = []
    for i in range(k):
        coeffs = np.zeros(v)
        coeffs[i * m:(i + 1) * m] = q[i]
        constraints.append(Constraint(tuple(coeffs), ">=", float(alpha)))
    for j in range(m):
        coeffs = np.zeros(v)
        coeffs[j::m] = q[:, j]
        constraints.append(Constraint(tuple(coeffs), "<=", float(beta)))
    return IlpProblem(objective=np.ones(v), constraints=constraints, variable_count=v)


def solve_with_beta_search(coverage: CoverageMatrix, alpha: float) -> ExplanationResult:
    """Smallest integer beta >= 0 with a feasible allocation, then solve there.

    Column usage never exceeds K (each q entry is at most 1), so the search
    is capped at beta = K: if the rows are coverable at all, feasibility is
    guaranteed by then.
    """
    q = coverage.q
    k, m = q.shape
    row_sums = q.sum(axis=1)
    short = np.flatnonzero(row_sums + _CHECK_TOL < alpha)
    if short.size:
        worst = int(short[np.argmin(row_sums[short])])
        raise InfeasibleCoverageError(worst, float(row_sums[worst]), alpha)

    for beta in range(0, k + 1):
        problem = build_explanation_ilp(coverage, alpha, float(beta))
        solution = solve(problem)
        if solution.status == "optimal":
            return _result_from_solution(solution, coverage, alpha, beta)
    raise InfeasibleCoverageError(int(np.argmin(row_sums)), float(row_sums.min()), alpha)


def _result_from_solution(solution: IlpSolution, coverage: CoverageMatrix,
                          alpha: float, beta: int) -> ExplanationResult:
    k, m = coverage.q.shape
    w = solution.assignment.reshape(k, m)
    row_cov = (w * coverage.q).sum(axis=1)
    col_use = (w * coverage.q).sum(axis=0)
    if (row_cov + _CHECK_TOL < alpha).any() or (col_use - _CHECK_TOL > beta).any():
        raise RuntimeError("solver returned an allocation violating its constraints")
    descriptors = [list(map(int, np.flatnonzero(w[i]))) for i in range(k)]
    mask = (w.sum(axis=0) > 0).astype(np.int64)
    return ExplanationResult(w=w, beta_star=beta, descriptors=descriptors, mask_diagonal=mask)


def apply_mask(tag_values, mask_diagonal) -> np.ndarray:
    """Zero every tag column whose mask bit is 0; idempotent."""
    values = getattr(tag_values, "values", tag_values)
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask_diagonal)
    if mask.shape != (values.shape[1],):
        raise ValueError(
            f"mask of length {mask.shape} does not fit {values.shape[1]} tag columns"
        )
    return values * (mask != 0)


def explanation_report(result: ExplanationResult, coverage: CoverageMatrix,
                       tag_names: list[str], alpha: float,
                       cluster_names: list[str] | None = None) -> dict:
    """JSON-ready summary: descriptors, coverage per cluster, beta, mask."""
    k, m = coverage.q.shape
    if len(tag_names) != m:
        raise ValueError("tag name count does not match coverage columns")
    if cluster_names is None:
        cluster_names = [f"cluster-{i}" for i in range(k)]
    clusters = []
    for i in range(k):
        picked = result.descriptors[i]
        if not picked:
            warnings.warn(f"cluster {i} received no descriptors", stacklevel=2)
        clusters.append({
            "index": i,
            "name": cluster_names[i],
            "size": int(coverage.cluster_sizes[i]),
            "descriptor_indices": picked,
            "descriptors": [tag_names[j] for j in picked],
            "descriptor_coverage": [float(coverage.q[i, j]) for j in picked],
            "row_coverage": float((result.w[i] * coverage.q[i]).sum()),
        })
    return {
        "schema_version": 1,
        "alpha": float(alpha),
        "beta_star": int(result.beta_star),
        "objective": result.objective,
        "tag_names": list(tag_names),
        "mask": [int(b) for b in result.mask_diagonal],
        "clusters": clusters,
    }
