"""First-order optimization machinery shared by the three algorithms.

Steepest ascent/descent with Armijo backtracking, constraint retractions
(unit sphere, orthogonal group), and the central-difference gradient used
as the agreement oracle throughout the test suite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NonFiniteError

__all__ = [
    "Retraction",
    "Termination",
    "OptimizerConfig",
    "OptimizerTrace",
    "retract",
    "tangent_project",
    "ascend",
    "descend",
    "fd_gradient",
    "relative_gradient_error",
]

# Line search gives up after this many shrinks of the trial step.
_MAX_BACKTRACKS = 60


class Retraction(enum.Enum):
    """Constraint set an iterate is pulled back to after each step."""

    NONE = "none"
    UNIT_NORM = "unit_norm"
    ORTHONORMAL = "orthonormal"


class Termination(enum.Enum):
    GRADIENT_SMALL = "gradient_small"
    OBJECTIVE_STALLED = "objective_stalled"
    MAX_ITERS = "max_iters"


@dataclass
class OptimizerConfig:
    """Knobs for :func:`ascend`/:func:`descend`.

    Defaults are conservative for desk-scale problems (a few channels,
    up to ~1e5 samples).
    """

    max_iters: int = 2000
    step0: float = 0.5
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    grad_tol: float = 1e-7
    obj_tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if not self.step0 > 0:
            raise ValueError(f"step0 must be positive, got {self.step0}")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError(f"backtrack_factor must be in (0,1), got {self.backtrack_factor}")
        if not 0 < self.armijo_c < 1:
            raise ValueError(f"armijo_c must be in (0,1), got {self.armijo_c}")
        if not self.grad_tol > 0:
            raise ValueError(f"grad_tol must be positive, got {self.grad_tol}")
        if not self.obj_tol > 0:
            raise ValueError(f"obj_tol must be positive, got {self.obj_tol}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")


@dataclass
class OptimizerTrace:
    """Per-iteration record: (iteration, objective, gradient norm, step size).

    Entry 0 is the (retracted) starting point with step size 0. Objectives
    are monotone in the improving direction: nondecreasing for ascent runs,
    nonincreasing for descent runs.
    """

    iterates: list = field(default_factory=list)
    termination: Termination = Termination.MAX_ITERS

    @property
    def objectives(self):
        return [rec[1] for rec in self.iterates]

    @property
    def n_iterations(self):
        return len(self.iterates) - 1

    def tail(self, n=5):
        return self.iterates[-n:]


def retract(state, retraction):
    """Map a state back onto its constraint set.

    UNIT_NORM normalizes each vector (the whole state if 1-D, each row if
    2-D); ORTHONORMAL projects to the nearest orthogonal matrix via the
    polar factor. Retracting an already-feasible state is a no-op up to
    rounding.
    """
    state = np.asarray(state, dtype=float)
    if retraction is Retraction.NONE:
        return state
    if retraction is Retraction.UNIT_NORM:
        if state.ndim == 1:
            norm = np.linalg.norm(state)
            if norm == 0:
                raise ValueError("cannot normalize a zero vector")
            return state / norm
        norms = np.linalg.norm(state, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("cannot normalize a zero row")
        return state / norms
    if retraction is Retraction.ORTHONORMAL:
        u, _, vt = np.linalg.svd(state, full_matrices=False)
        return u @ vt
    raise ValueError(f"unknown retraction {retraction!r}")


def tangent_project(gradient, state, retraction):
    """Project a gradient onto the tangent space of the constraint at ``state``.

    The state must already be feasible. With no retraction this is the
    identity; a gradient that is already tangent passes through unchanged
    up to rounding.
    """
    gradient = np.asarray(gradient, dtype=float)
    if retraction is Retraction.NONE:
        return gradient
    if retraction is Retraction.UNIT_NORM:
        if state.ndim == 1:
            return gradient - np.dot(state, gradient) * state
        return gradient - np.sum(state * gradient, axis=1, keepdims=True) * state
    if retraction is Retraction.ORTHONORMAL:
        a = state.T @ gradient
        return state @ ((a - a.T) / 2.0)
    raise ValueError(f"unknown retraction {retraction!r}")


def ascend(objective, gradient, init, retraction=Retraction.NONE, cfg=None):
    """Maximize ``objective`` by steepest ascent with Armijo backtracking.

    The search direction is the gradient projected onto the constraint's
    tangent space; each accepted step is retracted back onto the constraint,
    so every iterate is feasible. The line search restarts from
    ``cfg.step0`` every iteration and shrinks by ``cfg.backtrack_factor``
    until the Armijo condition holds.

    Returns
    -------
    (state, OptimizerTrace)
        Final state (objective >= objective at the retracted start) and the
        iteration trace.

    Raises
    ------
    NonFiniteError
        If the objective or gradient turns non-finite; the partial trace is
        attached to the exception.
    """
    if cfg is None:
        cfg = OptimizerConfig()
    trace = OptimizerTrace(termination=Termination.MAX_ITERS)

    state = retract(np.array(init, dtype=float, copy=True), retraction)

    def checked_objective(s):
        value = float(objective(s))
        if not np.isfinite(value):
            raise NonFiniteError(f"objective returned {value}", trace=trace)
        return value

    def checked_direction(s):
        grad = np.asarray(gradient(s), dtype=float)
        if grad.shape != s.shape:
            raise ValueError(f"gradient shape {grad.shape} != state shape {s.shape}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError("gradient returned non-finite entries", trace=trace)
        return tangent_project(grad, s, retraction)

    value = checked_objective(state)
    direction = checked_direction(state)
    dir_norm = float(np.linalg.norm(direction))
    trace.iterates.append((0, value, dir_norm, 0.0))

    for iteration in range(1, cfg.max_iters + 1):
        if dir_norm < cfg.grad_tol:
            trace.termination = Termination.GRADIENT_SMALL
            break

        step = cfg.step0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            candidate = retract(state + step * direction, retraction)
            cand_value = checked_objective(candidate)
            if cand_value >= value + cfg.armijo_c * step * dir_norm**2:
                accepted = True
                break
            step *= cfg.backtrack_factor
        if not accepted:
            trace.termination = Termination.OBJECTIVE_STALLED
            break

        gain = cand_value - value
        state, value = candidate, cand_value
        direction = checked_direction(state)
        dir_norm = float(np.linalg.norm(direction))
        trace.iterates.append((iteration, value, dir_norm, step))

        if gain < cfg.obj_tol * max(1.0, abs(value)):
            trace.termination = Termination.OBJECTIVE_STALLED
            break
    else:
        trace.termination = Termination.MAX_ITERS

    return state, trace


def descend(objective, gradient, init, retraction=Retraction.NONE, cfg=None):
    """Minimize ``objective``; same contract as :func:`ascend` mirrored.

    The returned trace reports the true (descending) objective values.
    """
    state, trace = ascend(
        lambda s: -objective(s),
        lambda s: -np.asarray(gradient(s), dtype=float),
        init,
        retraction,
        cfg,
    )
    trace.iterates = [(i, -f, g, a) for (i, f, g, a) in trace.iterates]
    return state, trace


def fd_gradient(objective, state, h):
    """Central-difference gradient, one coordinate at a time.

    Perturbs the raw parameters (for constrained problems the objective
    must be defined off-constraint in an ``h``-neighborhood).
    """
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    state = np.asarray(state, dtype=float)
    grad = np.zeros_like(state)
    probe = state.copy()
    for idx in np.ndindex(state.shape):
        base = state[idx]
        probe[idx] = base + h
        f_plus = float(objective(probe))
        probe[idx] = base - h
        f_minus = float(objective(probe))
        probe[idx] = base
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteError(
                f"non-finite finite-difference probe at coordinate {idx}"
            )
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_gradient_error(g_a, g_b):
    """The single agreement measure used everywhere:
    ||g_a - g_b|| / max(||g_a||, ||g_b||, 1e-12)."""
    g_a = np.asarray(g_a, dtype=float)
    g_b = np.asarray(g_b, dtype=float)
    num = float(np.linalg.norm(g_a - g_b))
    den = max(float(np.linalg.norm(g_a)), float(np.linalg.norm(g_b)), 1e-12)
    return num / den
