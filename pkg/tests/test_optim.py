"""Optimizer machinery: step rule, retractions, and the FD oracle itself."""

import numpy as np
import pytest

from phaselock import (
    NonFiniteError,
    OptimizerConfig,
    Retraction,
    Termination,
    ascend,
    descend,
    fd_gradient,
    relative_gradient_error,
)
from phaselock.optim import retract, tangent_project


class TestAscend:
    def test_concave_quadratic_converges(self):
        target = np.array([1.0, -2.0, 0.5])
        final, trace = ascend(
            lambda w: -np.sum((w - target) ** 2),
            lambda w: -2.0 * (w - target),
            np.zeros(3),
        )
        assert np.linalg.norm(final - target) < 1e-7
        assert trace.iterates[-1][2] < 1e-7  # gradient norm
        assert trace.termination is Termination.GRADIENT_SMALL

    def test_rayleigh_maximum_on_sphere(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal(4)
        final, trace = ascend(
            lambda w: float(np.dot(v, w) ** 2),
            lambda w: 2.0 * np.dot(v, w) * v,
            retract(rng.standard_normal(4), Retraction.UNIT_NORM),
            retraction=Retraction.UNIT_NORM,
        )
        assert abs(trace.objectives[-1] - np.dot(v, v)) < 1e-8
        assert abs(np.linalg.norm(final) - 1.0) < 1e-12
        assert min(abs(final - v / np.linalg.norm(v)).max(),
                   abs(final + v / np.linalg.norm(v)).max()) < 1e-4

    def test_trace_is_nondecreasing(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 3))
        sym = a + a.T
        final, trace = ascend(
            lambda w: float(w @ sym @ w),
            lambda w: 2.0 * (sym @ w),
            retract(rng.standard_normal(3), Retraction.UNIT_NORM),
            retraction=Retraction.UNIT_NORM,
        )
        objs = trace.objectives
        assert all(b >= a for a, b in zip(objs, objs[1:]))
        assert abs(np.linalg.norm(final) - 1.0) < 1e-12

    def test_zero_iterations_returns_retracted_init(self):
        cfg = OptimizerConfig(max_iters=0)
        init = np.array([3.0, 4.0])
        final, trace = ascend(
            lambda w: 0.0, lambda w: np.zeros(2), init,
            retraction=Retraction.UNIT_NORM, cfg=cfg,
        )
        assert np.allclose(final, [0.6, 0.8])
        assert trace.termination is Termination.MAX_ITERS
        assert trace.n_iterations == 0

    def test_nonfinite_objective_aborts_with_trace(self):
        with pytest.raises(NonFiniteError) as info:
            ascend(lambda w: float("nan"), lambda w: np.zeros(2), np.zeros(2))
        assert info.value.trace is not None

    def test_descend_minimizes_and_trace_descends(self):
        final, trace = descend(
            lambda w: float(np.sum((w - 2.0) ** 2)),
            lambda w: 2.0 * (w - 2.0),
            np.zeros(3),
        )
        assert np.linalg.norm(final - 2.0) < 1e-7
        objs = trace.objectives
        assert all(b <= a for a, b in zip(objs, objs[1:]))


class TestRetraction:
    def test_unit_norm_idempotent(self):
        rng = np.random.default_rng(2)
        w = retract(rng.standard_normal(5), Retraction.UNIT_NORM)
        assert np.max(np.abs(retract(w, Retraction.UNIT_NORM) - w)) < 1e-14

    def test_orthonormal_idempotent(self):
        rng = np.random.default_rng(3)
        q = retract(rng.standard_normal((4, 4)), Retraction.ORTHONORMAL)
        assert np.max(np.abs(q.T @ q - np.eye(4))) < 1e-12
        assert np.max(np.abs(retract(q, Retraction.ORTHONORMAL) - q)) < 1e-14

    def test_orthonormal_is_nearest_in_polar_sense(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((3, 3)) + 2 * np.eye(3)
        q = retract(a, Retraction.ORTHONORMAL)
        # polar factor: Q = A (A^T A)^{-1/2}
        vals, vecs = np.linalg.eigh(a.T @ a)
        root_inv = vecs @ np.diag(vals**-0.5) @ vecs.T
        assert np.max(np.abs(q - a @ root_inv)) < 1e-10

    def test_tangent_projection_kills_normal_component(self):
        rng = np.random.default_rng(5)
        w = retract(rng.standard_normal(4), Retraction.UNIT_NORM)
        g = rng.standard_normal(4)
        proj = tangent_project(g, w, Retraction.UNIT_NORM)
        assert abs(np.dot(w, proj)) < 1e-14

        q = retract(rng.standard_normal((3, 3)), Retraction.ORTHONORMAL)
        gm = rng.standard_normal((3, 3))
        pm = tangent_project(gm, q, Retraction.ORTHONORMAL)
        a = q.T @ pm
        assert np.max(np.abs(a + a.T)) < 1e-13  # skew in the group frame


class TestFdGradient:
    def test_quadratic_form(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((4, 4))
        w = rng.standard_normal(4)
        grad = fd_gradient(lambda v: float(v @ a @ v), w, h=1e-5)
        expected = (a + a.T) @ w
        assert relative_gradient_error(grad, expected) < 1e-7

    def test_constant_function(self):
        grad = fd_gradient(lambda v: 4.2, np.ones((2, 3)), h=1e-5)
        assert np.array_equal(grad, np.zeros((2, 3)))

    def test_matrix_state_entrywise(self):
        rng = np.random.default_rng(7)
        b = rng.standard_normal((3, 3))
        w = rng.standard_normal((3, 3))
        grad = fd_gradient(lambda m: float(np.sum(b * m)), w, h=1e-6)
        assert relative_gradient_error(grad, b) < 1e-8

    def test_nonfinite_probe_names_coordinate(self):
        def touchy(v):
            return float("inf") if v[1] > 1.5 else float(np.sum(v))

        with pytest.raises(NonFiniteError, match=r"\(1,\)"):
            fd_gradient(touchy, np.array([0.0, 1.5]), h=0.1)


class TestConfig:
    @pytest.mark.parametrize("field,value", [
        ("step0", 0.0), ("backtrack_factor", 1.0), ("armijo_c", 0.0),
        ("grad_tol", -1.0), ("obj_tol", 0.0), ("max_iters", -1),
    ])
    def test_bounds_enforced(self, field, value):
        with pytest.raises(ValueError):
            OptimizerConfig(**{field: value})

    def test_relative_error_guards_zero(self):
        assert relative_gradient_error(np.zeros(3), np.zeros(3)) == 0.0
