"""Referenced phase analysis: extract one source locked to a given phase.

Given multichannel analytic mixtures and a reference phase series psi(t),
find a unit vector w so that the phase phi(t) of the projected source
y(t) = w^T x(t) locks to psi(t). The objective is the squared magnitude of
the complex phase-locking value of d(t) = phi(t) - psi(t), climbed with its
closed-form gradient

    grad |plv|^2 = 2 |plv| < sin(Psi - d(t)) / Y^2(t) * G_x(t) > w,

where Psi is the argument of the PLV, Y^2 the squared instantaneous
amplitude of the source, G_x the antisymmetric pairwise kernel, and < >
the time average. The gradient is tangent to the unit sphere (w^T G w = 0
by antisymmetry), so unit-norm retraction never fights it to first order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import optim
from .exceptions import AmplitudeFloorError
from .optim import OptimizerConfig, OptimizerTrace, Retraction
from .signalcore import AnalyticMatrix, ComplexPLV

__all__ = ["RPAProblem", "RPASolution", "rpa_objective", "rpa_gradient", "rpa_solve"]


@dataclass
class RPAProblem:
    """Mixtures plus the reference phase to lock onto.

    ``amp_floor`` is relative: samples where the squared source amplitude
    falls below ``amp_floor * max_t Y^2`` make the phase ill-defined and
    raise instead of being clamped.
    """

    mixtures: AnalyticMatrix
    ref_phase: np.ndarray
    amp_floor: float = 1e-8

    def __post_init__(self):
        self.ref_phase = np.asarray(self.ref_phase, dtype=float).ravel()
        if self.ref_phase.size != self.mixtures.n_samples:
            raise ValueError(
                f"reference length {self.ref_phase.size} != "
                f"{self.mixtures.n_samples} samples"
            )
        if not np.all(np.isfinite(self.ref_phase)):
            raise ValueError("reference phase contains non-finite values")
        if not self.amp_floor > 0:
            raise ValueError(f"amp_floor must be positive, got {self.amp_floor}")

    @property
    def n_channels(self):
        return self.mixtures.n_channels


@dataclass
class RPASolution:
    w: np.ndarray
    plv: ComplexPLV
    trace: OptimizerTrace

    def __post_init__(self):
        norm = np.linalg.norm(self.w)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"solution vector norm {norm} != 1")


def _project(problem, w):
    """Project mixtures onto w; returns (y, y_h, Y^2) with the floor enforced."""
    w = np.asarray(w, dtype=float).ravel()
    if w.size != problem.n_channels:
        raise ValueError(f"w has {w.size} entries, expected {problem.n_channels}")
    if not np.any(w):
        raise ValueError("w must be nonzero")
    y = w @ problem.mixtures.x
    y_h = w @ problem.mixtures.x_h
    power = y * y + y_h * y_h
    n_bad = int(np.count_nonzero(power <= problem.amp_floor * power.max(initial=0.0)))
    if n_bad:
        raise AmplitudeFloorError(
            f"source amplitude under the floor at {n_bad} of {power.size} samples "
            f"(w nearly orthogonal to the signal subspace there)",
            n_samples=n_bad,
        )
    return y, y_h, power


def rpa_objective(problem, w):
    """Squared PLV magnitude of the projected source against the reference.

    Scale-invariant in w (phases ignore positive scaling); value in [0, 1].
    """
    y, y_h, _ = _project(problem, w)
    diff = np.arctan2(y_h, y) - problem.ref_phase
    locking = np.mean(np.exp(1j * diff))
    return float(np.abs(locking) ** 2)


def rpa_gradient(problem, w):
    """Closed-form gradient of :func:`rpa_objective` at w."""
    w = np.asarray(w, dtype=float).ravel()
    y, y_h, power = _project(problem, w)
    if problem.n_channels == 1:
        # 1x1 antisymmetric kernel is identically zero
        return np.zeros(1)
    diff = np.arctan2(y_h, y) - problem.ref_phase
    locking = np.mean(np.exp(1j * diff))
    magnitude = np.abs(locking)
    mean_angle = np.angle(locking)
    # kernel contraction: G_x(t) w == x_h(t) y(t) - x(t) y_h(t)
    weights = np.sin(mean_angle - diff) / power
    half = problem.mixtures.x_h @ (weights * y) - problem.mixtures.x @ (weights * y_h)
    return (2.0 * magnitude / problem.ref_phase.size) * half


def rpa_solve(problem, cfg=None, n_starts=8):
    """Best-of-n multistart ascent from random unit vectors.

    Starts whose evaluation hits the amplitude floor are discarded; if every
    start does, the floor error propagates.
    """
    if n_starts < 1:
        raise ValueError(f"n_starts must be >= 1, got {n_starts}")
    if cfg is None:
        cfg = OptimizerConfig()
    rng = np.random.default_rng(cfg.seed)

    best = None
    last_error = None
    for _ in range(n_starts):
        w0 = rng.standard_normal(problem.n_channels)
        w0 /= np.linalg.norm(w0)
        try:
            w_star, trace = optim.ascend(
                lambda w: rpa_objective(problem, w),
                lambda w: rpa_gradient(problem, w),
                w0,
                retraction=Retraction.UNIT_NORM,
                cfg=cfg,
            )
        except AmplitudeFloorError as err:
            last_error = err
            continue
        value = trace.objectives[-1]
        if best is None or value > best[0]:
            best = (value, w_star, trace)

    if best is None:
        raise AmplitudeFloorError(
            f"all {n_starts} starts hit the amplitude floor: {last_error}"
        )

    _, w_star, trace = best
    y, y_h, _ = _project(problem, w_star)
    diff = np.arctan2(y_h, y) - problem.ref_phase
    locking = ComplexPLV.from_complex(np.mean(np.exp(1j * diff)))
    return RPASolution(w=w_star, plv=locking, trace=trace)
