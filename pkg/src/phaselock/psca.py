"""Phase synchronization cluster analysis: rotate complex features apart.

Given a fixed complex feature matrix V (rows = channels, columns =
candidate components), optimize a real orthogonal matrix W so that the
columns of U = V W have maximal total column-sum magnitude

    J(W) = sum_j |ubar_j|,   ubar_j = sum_i u_ij.

Because ubar = vbar W with vbar the column sums of V, the gradient has the
closed entrywise form

    G_kj = [Re(vbar_k) Re(ubar_j) + Im(vbar_k) Im(ubar_j)] / |ubar_j|,

defined away from the kinks |ubar_j| = 0. Unconstrained ascent of J is
unbounded (any scaling of W scales J), so W is kept orthogonal by polar
retraction; channels are then assigned to the component whose |u_ij| is
largest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import optim
from .exceptions import GradientKinkError
from .optim import OptimizerConfig, OptimizerTrace, Retraction

__all__ = ["PSCAProblem", "PSCASolution", "psca_objective", "psca_gradient", "psca_solve"]

logger = logging.getLogger(__name__)

_KINK_TOL = 1e-12


@dataclass
class PSCAProblem:
    """Fixed complex feature matrix; the column count is the number of clusters sought."""

    V: np.ndarray

    def __post_init__(self):
        self.V = np.atleast_2d(np.asarray(self.V, dtype=complex))
        n, p = self.V.shape
        if not n >= p >= 1:
            raise ValueError(f"need n_rows >= n_components >= 1, got {n}x{p}")
        if not np.all(np.isfinite(self.V.real)) or not np.all(np.isfinite(self.V.imag)):
            raise ValueError("V contains non-finite entries")
        if np.any(~self.V.any(axis=0)):
            raise ValueError("V has an all-zero column")

    @property
    def n_rows(self):
        return self.V.shape[0]

    @property
    def n_components(self):
        return self.V.shape[1]

    @property
    def column_sums(self):
        return self.V.sum(axis=0)


@dataclass
class PSCASolution:
    W: np.ndarray
    U: np.ndarray
    J: float
    assignment: np.ndarray
    trace: OptimizerTrace

    def __post_init__(self):
        p = self.W.shape[0]
        ortho_err = np.max(np.abs(self.W.T @ self.W - np.eye(p)))
        if ortho_err > 1e-10:
            raise ValueError(f"W not orthogonal: max |W^T W - I| = {ortho_err}")
        recomputed = float(np.sum(np.abs(self.U.sum(axis=0))))
        if abs(recomputed - self.J) > 1e-12 * max(1.0, abs(self.J)):
            raise ValueError(f"J = {self.J} inconsistent with U ({recomputed})")


def _check_coeffs(problem, W):
    W = np.asarray(W, dtype=float)
    p = problem.n_components
    if W.shape != (p, p):
        raise ValueError(f"W must be {p}x{p} real, got {W.shape}")
    return W


def psca_objective(problem, W):
    """J(W) = sum over columns of |column sum of V W|."""
    W = _check_coeffs(problem, W)
    return float(np.sum(np.abs(problem.column_sums @ W)))


def psca_gradient(problem, W):
    """Entrywise gradient of J; raises at kinks (a column sum within 1e-12 of zero)."""
    W = _check_coeffs(problem, W)
    ubar = problem.column_sums @ W
    mags = np.abs(ubar)
    small = np.nonzero(mags <= _KINK_TOL)[0]
    if small.size:
        col = int(small[0])
        raise GradientKinkError(
            f"objective not differentiable: |column sum {col}| = {mags[col]:.3e}",
            column=col,
        )
    return np.real(np.outer(problem.column_sums, ubar.conj() / mags))


def _assign(problem, W):
    u = problem.V @ W
    return np.argmax(np.abs(u), axis=1), u


def psca_solve(problem, cfg=None, n_starts=8):
    """Multistart ascent over the orthogonal group; best final J wins.

    A start that lands on a kink is discarded (logged); if every start
    does, the kink error propagates. Channel i is assigned to
    argmax_j |u_ij|, ties toward the lowest j.
    """
    if n_starts < 1:
        raise ValueError(f"n_starts must be >= 1, got {n_starts}")
    if cfg is None:
        cfg = OptimizerConfig()
    rng = np.random.default_rng(cfg.seed)
    p = problem.n_components

    best = None
    last_kink = None
    for start in range(n_starts):
        q, r = np.linalg.qr(rng.standard_normal((p, p)))
        W0 = q * np.sign(np.diagonal(r))
        try:
            W_star, trace = optim.ascend(
                lambda W: psca_objective(problem, W),
                lambda W: psca_gradient(problem, W),
                W0,
                retraction=Retraction.ORTHONORMAL,
                cfg=cfg,
            )
        except GradientKinkError as err:
            logger.warning("discarding start %d: %s", start, err)
            last_kink = err
            continue
        value = trace.objectives[-1]
        if best is None or value > best[0]:
            best = (value, W_star, trace)

    if best is None:
        raise GradientKinkError(
            f"all {n_starts} starts hit a kink: {last_kink}",
            column=last_kink.column if last_kink else None,
        )

    value, W_star, trace = best
    assignment, u = _assign(problem, W_star)
    return PSCASolution(W=W_star, U=u, J=value, assignment=assignment, trace=trace)
