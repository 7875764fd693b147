"""Analytic-signal construction and phase-synchrony measures.

Everything downstream (referenced extraction, phase unmixing, cluster
rotation) consumes the quantities built here: per-channel analytic pairs
(x, x_h), instantaneous phases and amplitudes, complex phase-locking
values, and the antisymmetric pairwise kernel x_h x^T - x x_h^T.

Phases are wrapped to (-pi, pi]. Time averages use numpy's fixed reduction
order, so repeated runs on identical input are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

from .exceptions import NonFiniteError

__all__ = [
    "SignalMatrix",
    "AnalyticMatrix",
    "ComplexPLV",
    "PLVMatrix",
    "PairwiseKernel",
    "wrap_phase",
    "analytic",
    "plv",
    "plv_matrix",
    "mean_phase_diff",
    "circular_mean_phase_diff",
    "pairwise_kernel",
    "mean_offdiag_magnitude",
]


def wrap_phase(angle):
    """Wrap angles to (-pi, pi]. Values already in range pass through exactly."""
    angle = np.asarray(angle, dtype=float)
    wrapped = angle - 2.0 * np.pi * np.round(angle / (2.0 * np.pi))
    wrapped = np.where(wrapped > np.pi, wrapped - 2.0 * np.pi, wrapped)
    return np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)


def _check_finite(data, what="input"):
    """Reject non-finite entries, naming the first offending channel/sample."""
    if not np.all(np.isfinite(data)):
        ch, t = np.argwhere(~np.isfinite(data))[0]
        raise NonFiniteError(
            f"non-finite {what} at channel {ch}, sample {t}"
        )


@dataclass
class SignalMatrix:
    """Real multichannel time series, one row per channel.

    Parameters
    ----------
    data : ndarray, shape (n_channels, n_samples)
        Real-valued samples; must be finite, with at least 2 samples.
    sample_rate : float
        Samples per unit time. Informational only; no resampling happens.
    """

    data: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.data.ndim != 2:
            raise ValueError(f"signal data must be 2-D, got {self.data.ndim}-D")
        n, t = self.data.shape
        if n < 1 or t < 2:
            raise ValueError(f"need at least 1 channel and 2 samples, got {n}x{t}")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        _check_finite(self.data, "signal")

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]


@dataclass
class AnalyticMatrix:
    """Per-channel analytic pair (x, x_h) with derived phase and amplitude.

    ``x_h`` is the quadrature (Hilbert transform) of ``x``; ``phase`` is
    atan2(x_h, x) wrapped to (-pi, pi]; ``amplitude`` is sqrt(x^2 + x_h^2).
    """

    x: np.ndarray
    x_h: np.ndarray
    phase: np.ndarray
    amplitude: np.ndarray

    @classmethod
    def from_pair(cls, x, x_h):
        """Build from an in-phase/quadrature pair, deriving phase and amplitude."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x_h = np.atleast_2d(np.asarray(x_h, dtype=float))
        if x.shape != x_h.shape:
            raise ValueError(f"shape mismatch: x {x.shape} vs x_h {x_h.shape}")
        phase = np.arctan2(x_h, x)
        phase[phase == -np.pi] = np.pi
        return cls(x=x, x_h=x_h, phase=phase, amplitude=np.hypot(x, x_h))

    @property
    def n_channels(self):
        return self.x.shape[0]

    @property
    def n_samples(self):
        return self.x.shape[1]

    def trimmed(self, n_edge):
        """Drop ``n_edge`` samples at each end (e.g. to discard transform edge wobble)."""
        if n_edge == 0:
            return self
        if n_edge < 0 or 2 * n_edge >= self.n_samples:
            raise ValueError(
                f"cannot trim {n_edge} samples per end from {self.n_samples}"
            )
        sl = slice(n_edge, self.n_samples - n_edge)
        return AnalyticMatrix(
            x=self.x[:, sl],
            x_h=self.x_h[:, sl],
            phase=self.phase[:, sl],
            amplitude=self.amplitude[:, sl],
        )


@dataclass
class ComplexPLV:
    """Complex phase-locking value: magnitude is locking strength in [0, 1],
    argument is the mean relative phase."""

    re: float
    im: float

    def __post_init__(self):
        self.re = float(self.re)
        self.im = float(self.im)
        if self.magnitude > 1.0 + 1e-12:
            raise ValueError(f"|plv| = {self.magnitude} exceeds 1")

    @classmethod
    def from_complex(cls, value):
        return cls(re=value.real, im=value.imag)

    @property
    def value(self):
        return complex(self.re, self.im)

    @property
    def magnitude(self):
        return float(np.hypot(self.re, self.im))

    @property
    def angle(self):
        return float(np.arctan2(self.im, self.re))


@dataclass
class PLVMatrix:
    """Pairwise complex phase-locking values; Hermitian with unit diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        n, m = self.entries.shape
        if n != m:
            raise ValueError(f"PLV matrix must be square, got {n}x{m}")
        if not np.all(np.diagonal(self.entries) == 1.0):
            raise ValueError("PLV matrix diagonal must be exactly 1")
        asym = np.max(np.abs(self.entries - self.entries.conj().T))
        if asym > 1e-12:
            raise ValueError(f"PLV matrix not conjugate-symmetric: {asym}")

    @property
    def n_channels(self):
        return self.entries.shape[0]

    def magnitude(self):
        return np.abs(self.entries)

    def angle(self):
        return np.angle(self.entries)


def analytic(signal):
    """Construct the analytic extension of each channel.

    The quadrature component is the frequency-domain one-sided construction:
    positive-frequency bins doubled, DC (and the Nyquist bin for even
    lengths) passed through to the in-phase part only, negative bins zeroed.
    Full-length, no windowing; edge effects are the caller's concern
    (see :meth:`AnalyticMatrix.trimmed`).

    Parameters
    ----------
    signal : SignalMatrix or ndarray, shape (n_channels, n_samples)

    Returns
    -------
    AnalyticMatrix
    """
    if not isinstance(signal, SignalMatrix):
        signal = SignalMatrix(np.asarray(signal))
    x = signal.data
    x_h = np.imag(hilbert(x, axis=-1))
    return AnalyticMatrix.from_pair(x, x_h)


def plv(phase_a, phase_b):
    """Complex phase-locking value of two phase series.

    Returns the time average of the unit phasors of the phase difference,
    mean(exp(i*(phase_a - phase_b))).
    """
    phase_a = np.asarray(phase_a, dtype=float)
    phase_b = np.asarray(phase_b, dtype=float)
    if phase_a.shape != phase_b.shape or phase_a.ndim != 1:
        raise ValueError(
            f"phase series must be equal-length 1-D, got {phase_a.shape} and {phase_b.shape}"
        )
    if phase_a.size < 1:
        raise ValueError("need at least one sample")
    return ComplexPLV.from_complex(np.mean(np.exp(1j * (phase_a - phase_b))))


def _plv_entries(phases):
    """All pairwise complex PLVs of a phase matrix via one Gram product."""
    phasors = np.exp(1j * phases)
    entries = (phasors @ phasors.conj().T) / phases.shape[1]
    np.fill_diagonal(entries, 1.0)
    return entries


def plv_matrix(source, trim=0):
    """Pairwise complex PLV matrix over channel phases.

    Parameters
    ----------
    source : AnalyticMatrix or ndarray
        Analytic matrix, or a raw (n_channels, n_samples) phase matrix.
    trim : int
        Samples discarded at each end before averaging.
    """
    phases = source.phase if isinstance(source, AnalyticMatrix) else \
        np.atleast_2d(np.asarray(source, dtype=float))
    if trim:
        if trim < 0 or 2 * trim >= phases.shape[1]:
            raise ValueError(f"cannot trim {trim} samples per end from {phases.shape[1]}")
        phases = phases[:, trim:phases.shape[1] - trim]
    return PLVMatrix(_plv_entries(phases))


def mean_phase_diff(phase_j, phase_k):
    """Arithmetic time average of the raw difference series phase_j - phase_k.

    This is the plain mean of the angles as given (not the circular mean);
    for wrapped inputs the two can disagree, see :func:`circular_mean_phase_diff`.
    """
    phase_j = np.asarray(phase_j, dtype=float)
    phase_k = np.asarray(phase_k, dtype=float)
    if phase_j.shape != phase_k.shape:
        raise ValueError(f"length mismatch: {phase_j.shape} vs {phase_k.shape}")
    return float(np.mean(phase_j - phase_k))


def circular_mean_phase_diff(phase_j, phase_k):
    """Circular mean of the phase difference: arg mean(exp(i*(phase_j - phase_k))).

    Equals the argument of the complex PLV, and is the convention under which
    <cos d> = |plv| cos(psi), <sin d> = |plv| sin(psi) hold exactly.
    """
    return plv(phase_j, phase_k).angle


@dataclass
class PairwiseKernel:
    """One-sample pairwise kernel; antisymmetric with zero diagonal."""

    g: np.ndarray

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if not np.array_equal(self.g, -self.g.T):
            raise ValueError("kernel must be exactly antisymmetric")


def pairwise_kernel(source, t):
    """Antisymmetric pairwise kernel at one sample.

    ``g[i, j] = x_h[i, t] * x[j, t] - x[i, t] * x_h[j, t]``, which equals
    ``amplitude_i * amplitude_j * sin(phase_i - phase_j)``.
    """
    if not 0 <= t < source.n_samples:
        raise IndexError(f"sample index {t} out of range [0, {source.n_samples})")
    xt = source.x[:, t]
    ht = source.x_h[:, t]
    return PairwiseKernel(g=np.outer(ht, xt) - np.outer(xt, ht))


def mean_offdiag_magnitude(plvs, channels=None):
    """Mean |plv| over off-diagonal pairs, optionally restricted to a channel subset."""
    entries = plvs.entries if isinstance(plvs, PLVMatrix) else np.asarray(plvs)
    if channels is not None:
        idx = np.asarray(channels, dtype=int)
        entries = entries[np.ix_(idx, idx)]
    n = entries.shape[0]
    if n < 2:
        return 0.0
    off = ~np.eye(n, dtype=bool)
    return float(np.mean(np.abs(entries[off])))
