"""Coupled phase-oscillator networks: simulation and cluster mean fields.

The dynamics are the classic sine-coupled phase model,

    dphi_i/dt = omega_i + sum_k kappa_ik sin(phi_k - phi_i),

integrated with a fixed-step classical 4th-order Runge-Kutta scheme. The
integrator always evaluates the exact full coupling sum; the mean-field
reduction (coupling through the cluster order parameter rho e^{i Phi}) is
provided separately as a checkable identity, in both the factor-1 form
that the direct trigonometric identity gives and the factor-2 variant, so
the two can be adjudicated numerically rather than assumed.

Also here: synthesis of real-valued sources from phase trajectories and
linear instantaneous mixing, the ground-truth generators for the
separation algorithms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NonFiniteError, SingularMatrixError
from .signalcore import SignalMatrix, wrap_phase

__all__ = [
    "OscillatorNetwork",
    "PhaseTrajectory",
    "MeanField",
    "clustered",
    "phase_derivative",
    "simulate",
    "mean_field",
    "mean_field_coupling_check",
    "synth_sources",
    "mix",
]


@dataclass
class OscillatorNetwork:
    """Natural frequencies, coupling matrix, and a cluster partition.

    ``kappa[i, k]`` is the coupling coefficient from oscillator k onto i;
    the diagonal must be exactly zero. ``clusters`` must partition
    {0, ..., N-1}: every index in exactly one group.
    """

    omega: np.ndarray
    kappa: np.ndarray
    clusters: tuple

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float).ravel()
        self.kappa = np.asarray(self.kappa, dtype=float)
        n = self.omega.size
        if self.kappa.shape != (n, n):
            raise ValueError(f"kappa must be {n}x{n}, got {self.kappa.shape}")
        if np.any(np.diagonal(self.kappa) != 0.0):
            raise ValueError("kappa diagonal must be exactly zero")
        if not (np.all(np.isfinite(self.omega)) and np.all(np.isfinite(self.kappa))):
            raise ValueError("omega and kappa must be finite")
        self.clusters = tuple(np.asarray(c, dtype=int) for c in self.clusters)
        flat = np.concatenate(self.clusters) if self.clusters else np.array([], dtype=int)
        if not np.array_equal(np.sort(flat), np.arange(n)):
            raise ValueError("clusters must partition the oscillator indices exactly")

    @property
    def n_oscillators(self):
        return self.omega.size


@dataclass
class PhaseTrajectory:
    """Simulated phases, wrapped to (-pi, pi], one row per oscillator."""

    phases: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(self.phases)):
            raise ValueError("trajectory contains non-finite phases")

    @property
    def n_oscillators(self):
        return self.phases.shape[0]

    @property
    def n_samples(self):
        return self.phases.shape[1]


@dataclass
class MeanField:
    """Cluster order parameter: magnitude rho in [0, 1], mean angle Phi."""

    rho: float
    Phi: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0 + 1e-12:
            raise ValueError(f"rho = {self.rho} outside [0, 1]")


def clustered(omega, clusters, kappa_intra, kappa_inter=0.0):
    """Build a block-coupled network: one coefficient within clusters, another across."""
    omega = np.asarray(omega, dtype=float).ravel()
    n = omega.size
    members = [np.asarray(c, dtype=int) for c in clusters]
    kappa = np.full((n, n), float(kappa_inter))
    for idx in members:
        kappa[np.ix_(idx, idx)] = float(kappa_intra)
    np.fill_diagonal(kappa, 0.0)
    return OscillatorNetwork(omega=omega, kappa=kappa, clusters=tuple(members))


def phase_derivative(network, phases):
    """Right-hand side of the dynamics: exact full coupling sum, no reduction."""
    phases = np.asarray(phases, dtype=float)
    sin_p = np.sin(phases)
    cos_p = np.cos(phases)
    return network.omega + cos_p * (network.kappa @ sin_p) - sin_p * (network.kappa @ cos_p)


def simulate(network, phases0, dt, n_samples, seed=0, freq_jitter=0.0):
    """Integrate the network with fixed-step classical RK4.

    The first output column is the initial state; integration is carried
    unwrapped and the returned trajectory is wrapped. With
    ``freq_jitter > 0``, each step draws an independent per-oscillator
    frequency offset of that standard deviation (constant within the
    step's four stages), seeded for reproducibility; with the default 0
    the run is deterministic and ``seed`` is unused.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    state = np.array(phases0, dtype=float).ravel()
    n = network.n_oscillators
    if state.size != n:
        raise ValueError(f"initial phases have size {state.size}, expected {n}")

    rng = np.random.default_rng(seed) if freq_jitter > 0 else None
    out = np.empty((n, n_samples))
    out[:, 0] = state
    kappa = network.kappa
    omega = network.omega

    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_samples):
            w = omega if rng is None else omega + freq_jitter * rng.standard_normal(n)

            def rhs(p):
                sin_p = np.sin(p)
                cos_p = np.cos(p)
                return w + cos_p * (kappa @ sin_p) - sin_p * (kappa @ cos_p)

            k1 = rhs(state)
            k2 = rhs(state + 0.5 * dt * k1)
            k3 = rhs(state + 0.5 * dt * k2)
            k4 = rhs(state + dt * k3)
            state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(state)):
                raise NonFiniteError(f"integration diverged at step {step}", step=step)
            out[:, step] = state

    return PhaseTrajectory(phases=wrap_phase(out), dt=dt)


def mean_field(phases):
    """Order parameter of one phase vector: polar form of mean(exp(i*phi))."""
    phases = np.asarray(phases, dtype=float).ravel()
    if phases.size == 0:
        raise ValueError("mean field of an empty cluster is undefined")
    z = np.mean(np.exp(1j * phases))
    angle = float(np.angle(z))
    if angle == -np.pi:
        angle = np.pi
    return MeanField(rho=float(np.abs(z)), Phi=angle)


def mean_field_coupling_check(network, phases, cluster_index):
    """Exact intra-cluster coupling sum next to its two mean-field reductions.

    For each member i of the cluster, returns three vectors:

    - ``lhs``: the exact sum  sum_k kappa_ik sin(phi_k - phi_i)
    - ``rhs_factor1``: N_c * kappa * rho * sin(Phi - phi_i)
    - ``rhs_paper``: twice that (the factor-2 variant)

    Requires the cluster's internal coupling to be uniform and its external
    coupling zero; anything else violates the reduction's assumptions.
    """
    phases = np.asarray(phases, dtype=float).ravel()
    members = network.clusters[cluster_index]
    n_c = members.size
    block = network.kappa[np.ix_(members, members)]
    off = block[~np.eye(n_c, dtype=bool)]
    if off.size and not np.all(off == off[0]):
        raise ValueError(f"cluster {cluster_index} coupling is not uniform")
    kappa_c = float(off[0]) if off.size else 0.0
    rest = np.setdiff1d(np.arange(network.n_oscillators), members)
    if rest.size and (
        np.any(network.kappa[np.ix_(members, rest)] != 0.0)
        or np.any(network.kappa[np.ix_(rest, members)] != 0.0)
    ):
        raise ValueError(f"cluster {cluster_index} has nonzero external coupling")

    local = phases[members]
    diffs = np.sin(local[np.newaxis, :] - local[:, np.newaxis])
    lhs = kappa_c * diffs.sum(axis=1)
    field = mean_field(local)
    rhs_factor1 = n_c * kappa_c * field.rho * np.sin(field.Phi - local)
    return lhs, rhs_factor1, 2.0 * rhs_factor1


def _smooth_envelopes(rng, n_channels, n_samples):
    """Per-channel envelopes in [0.5, 1.5], a few cycles over the whole record."""
    tau = np.arange(n_samples) / n_samples
    envelopes = np.empty((n_channels, n_samples))
    for i in range(n_channels):
        coeffs = rng.standard_normal(3)
        offsets = rng.uniform(0.0, 2.0 * np.pi, 3)
        raw = sum(
            c * np.cos(2.0 * np.pi * (k + 1) * tau + th)
            for k, (c, th) in enumerate(zip(coeffs, offsets))
        )
        peak = np.max(np.abs(raw))
        envelopes[i] = 1.0 + (0.5 * raw / peak if peak > 0 else 0.0)
    return envelopes


def synth_sources(trajectory, mode="unit", seed=0):
    """Real sources from a phase trajectory: s_i(t) = X_i(t) cos(phi_i(t)).

    ``mode="unit"`` uses constant unit amplitude; ``mode="smooth_random"``
    modulates each channel with a seeded slow envelope bounded in
    [0.5, 1.5] (bandwidth of a few cycles per record, far below any
    reasonable carrier), so the analytic phases of the output still track
    the trajectory phases away from the record edges.
    """
    if mode not in ("unit", "smooth_random"):
        raise ValueError(f"unknown amplitude mode {mode!r}")
    data = np.cos(trajectory.phases)
    if mode == "smooth_random":
        rng = np.random.default_rng(seed)
        data = _smooth_envelopes(rng, *trajectory.phases.shape) * data
    return SignalMatrix(data=data, sample_rate=1.0 / trajectory.dt)


def mix(sources, mixing):
    """Linear instantaneous mixing x = M s with a square invertible M."""
    m = np.asarray(mixing, dtype=float)
    n = sources.n_channels
    if m.shape != (n, n):
        raise ValueError(f"mixing matrix must be {n}x{n}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("mixing matrix must be finite")
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularMatrixError(f"mixing matrix is singular (cond = {cond:.3e})")
    return SignalMatrix(data=m @ sources.data, sample_rate=sources.sample_rate)
