import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tagclust.data import TagMatrix, impute_tags
from tagclust.explain import (
    CoverageMatrix,
    EmptyClusterError,
    InfeasibleCoverageError,
    apply_mask,
    build_explanation_ilp,
    compute_coverage,
    explanation_report,
    solve_with_beta_search,
)
from tagclust.ilp import solve
from oracles import enumerate_ilp


def cov(q, sizes=None):
    q = np.asarray(q, dtype=float)
    if sizes is None:
        sizes = np.ones(q.shape[0], dtype=np.int64)
    return CoverageMatrix(q=q, cluster_sizes=np.asarray(sizes))


class TestComputeCoverage:
    def test_two_instance_mean(self):
        values = np.array([[1.0, 0.0], [1.0, 1.0]])
        out = compute_coverage(values, [0, 0], k=1)
        np.testing.assert_allclose(out.q, [[1.0, 0.5]])
        assert out.cluster_sizes.tolist() == [2]

    def test_imputed_member_carries_mean(self):
        tags = TagMatrix(np.array([[1.0], [0.0], [np.nan], [1.0]]), ["t"])
        imputed = impute_tags(tags)
        out = compute_coverage(imputed, [0, 1, 0, 1], k=2)
        # cluster 0 holds rows {1, 2/3} -> mean 5/6
        assert out.q[0, 0] == pytest.approx((1.0 + 2 / 3) / 2)

    def test_single_cluster_collapse(self):
        rng = np.random.default_rng(0)
        values = rng.random((7, 3))
        out = compute_coverage(values, np.zeros(7, dtype=int), k=1)
        np.testing.assert_allclose(out.q[0], values.mean(axis=0))

    def test_empty_cluster_error_carries_index(self):
        with pytest.raises(EmptyClusterError) as err:
            compute_coverage(np.ones((3, 2)), [0, 0, 2], k=3)
        assert err.value.cluster == 1


class TestBuildIlp:
    def test_variable_and_constraint_counts(self):
        problem = build_explanation_ilp(cov(np.ones((2, 3)) * 0.5), alpha=1.0, beta=1.0)
        assert problem.variable_count == 6
        assert len(problem.constraints) == 5

    def test_zero_row_infeasible_at_solver(self):
        q = np.array([[0.0, 0.0], [1.0, 1.0]])
        problem = build_explanation_ilp(cov(q), alpha=0.5, beta=2.0)
        assert solve(problem).status == "infeasible"

    def test_constraint_coefficients_match_q(self):
        q = np.array([[0.25, 0.75, 0.5], [1.0, 0.0, 0.5]])
        problem = build_explanation_ilp(cov(q), alpha=1.0, beta=1.0)
        row0 = np.asarray(problem.constraints[0].coefficients)
        np.testing.assert_array_equal(row0[:3], q[0])
        np.testing.assert_array_equal(row0[3:], 0.0)
        col1 = np.asarray(problem.constraints[2 + 1].coefficients)
        np.testing.assert_array_equal(col1[[1, 4]], q[:, 1])
        assert col1[[0, 2, 3, 5]].tolist() == [0.0] * 4


class TestBetaSearch:
    def test_two_cluster_overlap_example(self):
        # Pinned by enumeration: beta=0 infeasible, beta=1 optimal with 2 tags.
        coverage = cov([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        assert enumerate_ilp(build_explanation_ilp(coverage, 1.0, 0.0))[0] is None
        assert enumerate_ilp(build_explanation_ilp(coverage, 1.0, 1.0))[0] == 2.0
        result = solve_with_beta_search(coverage, alpha=1.0)
        assert result.beta_star == 1
        assert result.objective == 2
        assert all(len(d) >= 1 for d in result.descriptors)

    def test_disjoint_tags(self):
        result = solve_with_beta_search(cov(np.eye(2)), alpha=1.0)
        assert result.beta_star == 1
        assert result.descriptors == [[0], [1]]

    def test_structural_infeasibility_names_cluster(self):
        with pytest.raises(InfeasibleCoverageError) as err:
            solve_with_beta_search(cov([[0.2, 0.2], [1.0, 1.0]]), alpha=1.0)
        assert err.value.cluster == 0

    def test_mask_matches_allocation(self):
        result = solve_with_beta_search(cov([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]), 1.0)
        np.testing.assert_array_equal(result.mask_diagonal, result.w.sum(axis=0) > 0)

    @pytest.mark.parametrize("seed", range(12))
    def test_minimality_and_optimality_on_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 4))
        m = int(rng.integers(1, 5))
        q = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=(k, m))
        alpha = float(rng.choice([0.5, 1.0]))
        coverage = cov(q)
        try:
            result = solve_with_beta_search(coverage, alpha)
        except InfeasibleCoverageError:
            assert (q.sum(axis=1) + 1e-9 < alpha).any()
            return
        at_beta, _ = enumerate_ilp(build_explanation_ilp(coverage, alpha, float(result.beta_star)))
        assert at_beta == pytest.approx(result.objective, abs=1e-9)
        if result.beta_star >= 1:
            below, _ = enumerate_ilp(
                build_explanation_ilp(coverage, alpha, float(result.beta_star - 1))
            )
            assert below is None
        # Returned allocation re-checks exactly.
        row = (result.w * q).sum(axis=1)
        col = (result.w * q).sum(axis=0)
        assert (row >= alpha - 1e-9).all()
        assert (col <= result.beta_star + 1e-9).all()


class TestApplyMask:
    def test_identity(self):
        values = np.random.default_rng(0).random((4, 3))
        np.testing.assert_array_equal(apply_mask(values, np.ones(3)), values)

    def test_annihilation(self):
        values = np.random.default_rng(1).random((4, 3))
        np.testing.assert_array_equal(apply_mask(values, np.zeros(3)), 0.0)

    def test_column_selection(self):
        out = apply_mask(np.array([[0.5, 0.7]]), np.array([1, 0]))
        np.testing.assert_array_equal(out, [[0.5, 0.0]])

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        values = rng.random((5, 4))
        mask = rng.integers(0, 2, 4)
        once = apply_mask(values, mask)
        np.testing.assert_array_equal(once, apply_mask(once, mask))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            apply_mask(np.ones((2, 3)), np.ones(2))


def test_report_shape():
    coverage = cov([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]], sizes=[3, 4])
    result = solve_with_beta_search(coverage, alpha=1.0)
    report = explanation_report(result, coverage, ["a", "b", "c"], alpha=1.0)
    assert report["schema_version"] == 1
    assert report["beta_star"] == 1
    assert report["objective"] == 2
    assert len(report["clusters"]) == 2
    assert report["clusters"][0]["size"] == 3
    for cluster in report["clusters"]:
        assert cluster["row_coverage"] >= 1.0 - 1e-9


@given(st.integers(0, 100_000))
@settings(max_examples=30, deadline=None)
def test_mask_idempotence_property(seed):
    rng = np.random.default_rng(seed)
    values = rng.random((int(rng.integers(1, 6)), int(rng.integers(1, 6))))
    mask = rng.integers(0, 2, values.shape[1])
    once = apply_mask(values, mask)
    np.testing.assert_array_equal(once, apply_mask(once, mask))
