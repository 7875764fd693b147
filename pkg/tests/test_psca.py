"""Cluster rotation: column-sum objective, entrywise gradient, assignment."""

import numpy as np
import pytest

from phaselock import (
    GradientKinkError,
    OptimizerConfig,
    PSCAProblem,
    fd_gradient,
    psca_gradient,
    psca_objective,
    psca_solve,
    relative_gradient_error,
)
from phaselock.gradcheck import psca_instance


def block_features(rng, sizes, spreads=0.4):
    """Complex feature matrix with one column per cluster, disjoint row support."""
    n = sum(sizes)
    v = np.zeros((n, len(sizes)), dtype=complex)
    start = 0
    for j, size in enumerate(sizes):
        center = rng.uniform(-np.pi, np.pi)
        angles = center + spreads * rng.standard_normal(size)
        v[start:start + size, j] = np.exp(1j * angles)
        start += size
    return v


class TestObjective:
    def test_identity_gives_column_sum_magnitudes(self):
        rng = np.random.default_rng(0)
        problem, _ = psca_instance(seed=0, index=0)
        expected = np.sum(np.abs(problem.V.sum(axis=0)))
        assert abs(psca_objective(problem, np.eye(3)) - expected) < 1e-12

    def test_scalar_case_is_product_of_magnitudes(self):
        problem = PSCAProblem(V=np.array([[1.0 + 2.0j], [0.5 - 1.0j]]))
        vbar = abs(problem.V.sum())
        for w in (0.3, -2.0, 1.0):
            assert abs(psca_objective(problem, np.array([[w]])) - vbar * abs(w)) < 1e-12

    def test_two_paths_agree(self):
        for index in range(20):
            problem, W = psca_instance(seed=1, index=index)
            shortcut = psca_objective(problem, W)
            full = float(np.sum(np.abs((problem.V @ W).sum(axis=0))))
            assert abs(shortcut - full) < 1e-12

    def test_column_negation_invariance(self):
        problem, W = psca_instance(seed=2, index=0)
        flipped = W.copy()
        flipped[:, 1] *= -1.0
        assert abs(psca_objective(problem, W) - psca_objective(problem, flipped)) < 1e-12

    def test_all_zero_column_rejected(self):
        v = np.ones((3, 2), dtype=complex)
        v[:, 1] = 0.0
        with pytest.raises(ValueError):
            PSCAProblem(V=v)


class TestGradient:
    def test_scalar_case_sign_rule(self):
        problem = PSCAProblem(V=np.array([[2.0 + 1.0j], [1.0 - 0.5j]]))
        vbar = abs(problem.V.sum())
        for w in (0.7, -1.3):
            grad = psca_gradient(problem, np.array([[w]]))
            assert abs(grad[0, 0] - np.sign(w) * vbar) < 1e-12

    def test_real_features_reduce_to_sign_rule(self):
        rng = np.random.default_rng(3)
        v = rng.uniform(0.5, 2.0, (4, 2)).astype(complex)
        problem = PSCAProblem(V=v)
        W = np.eye(2)  # positive column sums of U
        grad = psca_gradient(problem, W)
        vbar = np.real(v.sum(axis=0))
        expected = np.outer(vbar, np.ones(2) * np.sign(np.real(problem.column_sums @ W)))
        np.testing.assert_allclose(grad, expected, atol=1e-12)

    def test_matches_finite_differences(self):
        for index in range(20):
            problem, W = psca_instance(seed=4, index=index)
            grad = psca_gradient(problem, W)
            oracle = fd_gradient(lambda m: psca_objective(problem, m), W, h=1e-5)
            assert relative_gradient_error(grad, oracle) < 1e-6

    def test_kink_names_column(self):
        v = np.array([[1.0 + 0.0j, 1.0j], [-1.0 + 0.0j, 1.0j]])  # first column sums to 0
        problem = PSCAProblem(V=v)
        with pytest.raises(GradientKinkError) as info:
            psca_gradient(problem, np.eye(2))
        assert info.value.column == 0


class TestSolve:
    def test_recovers_two_block_partition(self):
        rng = np.random.default_rng(5)
        problem = PSCAProblem(V=block_features(rng, (4, 2)))
        solution = psca_solve(problem, cfg=OptimizerConfig(seed=1), n_starts=6)
        labels = solution.assignment
        assert len(set(labels[:4])) == 1
        assert len(set(labels[4:])) == 1
        assert labels[0] != labels[4]

    def test_scalar_solution_is_sign(self):
        problem = PSCAProblem(V=np.array([[1.0 + 1.0j], [2.0 - 0.5j]]))
        solution = psca_solve(problem, cfg=OptimizerConfig(seed=0), n_starts=2)
        assert abs(abs(solution.W[0, 0]) - 1.0) < 1e-12
        assert abs(solution.J - abs(problem.V.sum())) < 1e-12

    def test_ascent_contract_beats_every_start(self):
        problem, _ = psca_instance(seed=6, index=0)
        cfg = OptimizerConfig(seed=7, max_iters=100)
        solution = psca_solve(problem, cfg=cfg, n_starts=5)
        rng = np.random.default_rng(7)
        for _ in range(5):
            q, r = np.linalg.qr(rng.standard_normal((3, 3)))
            start = q * np.sign(np.diagonal(r))
            assert solution.J >= psca_objective(problem, start) - 1e-12

    def test_solution_invariants_enforced(self):
        problem, _ = psca_instance(seed=8, index=0)
        solution = psca_solve(problem, cfg=OptimizerConfig(seed=2, max_iters=50), n_starts=3)
        p = solution.W.shape[0]
        assert np.max(np.abs(solution.W.T @ solution.W - np.eye(p))) < 1e-10
        assert solution.U.shape == problem.V.shape

    def test_assignment_invariant_under_column_negation(self):
        from phaselock.psca import _assign

        problem, W = psca_instance(seed=9, index=0)
        flipped = W.copy()
        flipped[:, 2] *= -1.0
        labels, _ = _assign(problem, W)
        labels_flipped, _ = _assign(problem, flipped)
        assert np.array_equal(labels, labels_flipped)

    def test_assignment_ties_break_to_lowest_component(self):
        from phaselock.psca import _assign

        problem = PSCAProblem(
            V=np.array([[1.0 + 0.0j, 1.0 + 0.0j], [1.0 + 0.0j, -1.0 + 0.0j]])
        )
        labels, _ = _assign(problem, np.eye(2))
        assert np.array_equal(labels, [0, 0])

    def test_all_starts_at_kinks_raises(self):
        # both column sums are identically zero for every W
        v = np.array([[1.0 + 1.0j, 2.0 - 1.0j], [-1.0 - 1.0j, -2.0 + 1.0j]])
        problem = PSCAProblem(V=v)
        with pytest.raises(GradientKinkError):
            psca_solve(problem, cfg=OptimizerConfig(seed=0), n_starts=3)
