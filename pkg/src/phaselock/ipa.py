"""Independent phase analysis: unmix one subspace by de-locking its sources.

For an analytic subspace (z, z_h) with N channels, optimize a square real
matrix W so the estimated sources y = W z become pairwise phase-independent.
The locking term is

    P(W) = (1 - lam) / N^2 * sum_{m,n} |plv_mn|^2

over the pairwise complex PLVs of the unmixed phases, and the default
objective J = P - lam * log|det W| is minimized: driving P down separates,
the log-det barrier keeps W away from singularity. The opposite barrier
sign is available via ``logdet_sign`` for comparison runs.

The gradient of P has one closed-form row per source,

    grad_j P = 4 (1-lam)/N^2 * sum_k |plv_jk|
               < sin(psi_jk - d_jk(t)) / Y_j^2(t) * G_z(t) > w_j,

with psi_jk the circular mean of the phase difference d_jk (the convention
under which the derivation's angle substitution is exact), and the log-det
derivative is W^{-T}. Terms with |plv_jk| below 1e-12 are skipped; the
diagonal contributes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import optim
from .exceptions import AmplitudeFloorError, SingularMatrixError
from .optim import OptimizerConfig, OptimizerTrace, Retraction
from .signalcore import AnalyticMatrix, PLVMatrix, _plv_entries

__all__ = ["IPAProblem", "IPASolution", "ipa_objective", "ipa_gradient", "ipa_solve"]

_PLV_SKIP = 1e-12


@dataclass
class IPAProblem:
    """One analytic subspace and the locking/volume tradeoff weight."""

    subspace: AnalyticMatrix
    lam: float
    amp_floor: float = 1e-8
    logdet_sign: float = -1.0

    def __post_init__(self):
        if self.subspace.n_channels < 2:
            raise ValueError("need at least 2 channels to unmix")
        if not 0.0 <= self.lam < 1.0:
            raise ValueError(f"lam must be in [0, 1), got {self.lam}")
        if not self.amp_floor > 0:
            raise ValueError(f"amp_floor must be positive, got {self.amp_floor}")
        if self.logdet_sign not in (-1.0, 1.0):
            raise ValueError(f"logdet_sign must be -1 or +1, got {self.logdet_sign}")

    @property
    def n_channels(self):
        return self.subspace.n_channels


@dataclass
class IPASolution:
    W: np.ndarray
    plv_before: PLVMatrix
    plv_after: PLVMatrix
    trace: OptimizerTrace

    def __post_init__(self):
        if abs(np.linalg.det(self.W)) <= 1e-12:
            raise ValueError("unmixing matrix is numerically singular")


def _check_square(problem, W):
    W = np.asarray(W, dtype=float)
    n = problem.n_channels
    if W.shape != (n, n):
        raise ValueError(f"W must be {n}x{n}, got {W.shape}")
    return W


def _unmix(problem, W):
    """Apply W to the analytic pair; returns (y, y_h, Y^2) with floor enforced per row."""
    y = W @ problem.subspace.x
    y_h = W @ problem.subspace.x_h
    power = y * y + y_h * y_h
    floor = problem.amp_floor * power.max(axis=1, keepdims=True)
    bad_rows = np.nonzero(np.any(power <= floor, axis=1))[0]
    if bad_rows.size:
        row = int(bad_rows[0])
        n_bad = int(np.count_nonzero(power[row] <= floor[row]))
        raise AmplitudeFloorError(
            f"estimated source {row} under the amplitude floor at {n_bad} samples",
            n_samples=n_bad,
            row=row,
        )
    return y, y_h, power


def _logabsdet(W):
    sign, logdet = np.linalg.slogdet(W)
    if sign == 0:
        raise SingularMatrixError("unmixing matrix is singular")
    return logdet


def _locking_entries(y, y_h):
    return _plv_entries(np.arctan2(y_h, y))


def ipa_objective(problem, W):
    """J = P(W) + logdet_sign * lam * log|det W| (default sign -1, minimized)."""
    W = _check_square(problem, W)
    logdet = _logabsdet(W)
    y, y_h, _ = _unmix(problem, W)
    entries = _locking_entries(y, y_h)
    n = problem.n_channels
    locking = (1.0 - problem.lam) / n**2 * float(np.sum(np.abs(entries) ** 2))
    return locking + problem.logdet_sign * problem.lam * logdet


def ipa_gradient(problem, W, include_logdet=True):
    """Closed-form gradient of :func:`ipa_objective`.

    With ``include_logdet=False`` returns only the locking-term gradient
    (each row of which is tangent to its w_j: w_j^T grad_j P = 0).
    """
    W = _check_square(problem, W)
    y, y_h, power = _unmix(problem, W)
    entries = _locking_entries(y, y_h)

    phases = np.arctan2(y_h, y)
    phasors = np.exp(1j * phases)
    kept = np.where(np.abs(entries) < _PLV_SKIP, 0.0, entries)
    # row_weights[j, t] = sum_k |plv_jk| sin(psi_jk - (phi_j - phi_k))
    row_weights = np.imag(phasors.conj() * (kept @ phasors)) / power

    n, t = power.shape
    scale = 4.0 * (1.0 - problem.lam) / (n**2 * t)
    # kernel contraction per row: G_z(t) w_j == z_h(t) y_j(t) - z(t) y_hj(t)
    grad = scale * (
        (row_weights * y) @ problem.subspace.x_h.T
        - (row_weights * y_h) @ problem.subspace.x.T
    )
    if include_logdet:
        try:
            inv_t = np.linalg.inv(W).T
        except np.linalg.LinAlgError as err:
            raise SingularMatrixError(f"unmixing matrix is singular: {err}") from err
        grad = grad + problem.logdet_sign * problem.lam * inv_t
    return grad


def _haar_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diagonal(r))


def ipa_solve(problem, cfg=None, n_starts=1):
    """Minimize the objective from identity plus random orthogonal starts.

    Start 0 is the identity (so ``plv_before`` describes the input channels
    themselves); further starts are Haar-random orthogonal matrices. No
    retraction is applied: the log-det barrier keeps iterates invertible.
    """
    if n_starts < 1:
        raise ValueError(f"n_starts must be >= 1, got {n_starts}")
    if cfg is None:
        cfg = OptimizerConfig()
    rng = np.random.default_rng(cfg.seed)
    n = problem.n_channels

    best = None
    for start in range(n_starts):
        W0 = np.eye(n) if start == 0 else _haar_orthogonal(rng, n)
        W_star, trace = optim.descend(
            lambda W: ipa_objective(problem, W),
            lambda W: ipa_gradient(problem, W),
            W0,
            retraction=Retraction.NONE,
            cfg=cfg,
        )
        value = trace.objectives[-1]
        if best is None or value < best[0]:
            best = (value, W_star, trace)

    _, W_star, trace = best
    before = PLVMatrix(_plv_entries(problem.subspace.phase))
    y, y_h, _ = _unmix(problem, W_star)
    after = PLVMatrix(_locking_entries(y, y_h))
    return IPASolution(W=W_star, plv_before=before, plv_after=after, trace=trace)
