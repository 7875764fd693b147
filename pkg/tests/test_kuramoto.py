"""Oscillator network simulation, mean fields, synthesis, and mixing."""

import numpy as np
import pytest

from phaselock import (
    NonFiniteError,
    OscillatorNetwork,
    SingularMatrixError,
    analytic,
    clustered,
    mean_field,
    mean_field_coupling_check,
    mix,
    phase_derivative,
    plv,
    simulate,
    synth_sources,
    wrap_phase,
)


def circular_gap(a, b):
    return np.abs(wrap_phase(a - b))


class TestPhaseDerivative:
    def test_uncoupled_returns_natural_frequencies(self):
        omega = np.array([1.0, -0.5, 2.0])
        network = clustered(omega, [[0, 1, 2]], kappa_intra=0.0)
        rng = np.random.default_rng(0)
        assert np.array_equal(
            phase_derivative(network, rng.uniform(-np.pi, np.pi, 3)), omega
        )

    def test_synchronized_phases_cancel_coupling(self):
        omega = np.array([0.3, 0.7])
        network = clustered(omega, [[0, 1]], kappa_intra=2.5)
        assert np.allclose(
            phase_derivative(network, np.full(2, 1.234)), omega, atol=1e-15
        )

    def test_two_oscillator_quadrature(self):
        omega = np.array([1.0, 2.0])
        k = 0.8
        network = clustered(omega, [[0, 1]], kappa_intra=k)
        deriv = phase_derivative(network, np.array([0.0, np.pi / 2]))
        assert np.allclose(deriv, [omega[0] + k, omega[1] - k], atol=1e-15)

    def test_global_phase_shift_invariance(self):
        rng = np.random.default_rng(1)
        network = clustered(rng.uniform(0.5, 2.0, 5), [[0, 1, 2], [3, 4]],
                            kappa_intra=0.7, kappa_inter=0.1)
        phases = rng.uniform(-np.pi, np.pi, 5)
        for shift in (0.5, -2.0, np.pi):
            gap = phase_derivative(network, phases + shift) - phase_derivative(network, phases)
            assert np.max(np.abs(gap)) < 1e-12


class TestSimulate:
    def test_uncoupled_linear_phase_advance(self):
        omega = np.array([1.3, -0.7])
        network = clustered(omega, [[0], [1]], kappa_intra=0.0)
        phases0 = np.array([0.4, -1.0])
        dt, n_samples = 1e-3, 10_000
        trajectory = simulate(network, phases0, dt, n_samples)
        t = np.arange(n_samples) * dt
        expected = wrap_phase(phases0[:, np.newaxis] + omega[:, np.newaxis] * t)
        assert np.max(circular_gap(trajectory.phases, expected)) < 1e-8

    def test_two_oscillator_lock_matches_separable_solution(self):
        # equal frequencies: the phase gap obeys d(gap)/dt = -2 k sin(gap),
        # whose exact solution is tan(gap/2) = tan(gap0/2) exp(-2 k t)
        k, dt, n_samples = 0.5, 1e-2, 2001
        network = clustered(np.array([1.0, 1.0]), [[0, 1]], kappa_intra=k)
        gap0 = 0.3
        trajectory = simulate(network, np.array([gap0, 0.0]), dt, n_samples)
        gap_final = wrap_phase(trajectory.phases[0, -1] - trajectory.phases[1, -1])
        t_final = (n_samples - 1) * dt
        exact = 2.0 * np.arctan(np.tan(gap0 / 2.0) * np.exp(-2.0 * k * t_final))
        assert abs(gap_final) < 1e-3
        assert abs(gap_final - exact) < 1e-6

    def test_step_halving_self_convergence(self):
        rng = np.random.default_rng(2)
        network = clustered(rng.uniform(0.8, 1.2, 4), [[0, 1, 2, 3]], kappa_intra=0.4)
        phases0 = rng.uniform(-np.pi, np.pi, 4)
        coarse = simulate(network, phases0, 1e-2, 1001)
        fine = simulate(network, phases0, 5e-3, 2001)
        gap = circular_gap(coarse.phases[:, -1], fine.phases[:, -1])
        assert np.max(gap) < 1e-6

    def test_deterministic_per_seed_with_jitter(self):
        network = clustered(np.array([1.0, 1.1]), [[0, 1]], kappa_intra=0.2)
        runs = [
            simulate(network, np.zeros(2), 0.01, 500, seed=5, freq_jitter=0.1).phases
            for _ in range(2)
        ]
        assert np.array_equal(runs[0], runs[1])
        other = simulate(network, np.zeros(2), 0.01, 500, seed=6, freq_jitter=0.1).phases
        assert not np.array_equal(runs[0], other)

    def test_divergence_reports_step_index(self):
        network = clustered(np.array([1.0]), [[0]], kappa_intra=0.0)
        with pytest.raises(NonFiniteError) as info:
            simulate(network, np.zeros(1), 1e308, 10)
        assert info.value.step is not None

    def test_output_is_wrapped(self):
        network = clustered(np.array([5.0]), [[0]], kappa_intra=0.0)
        trajectory = simulate(network, np.zeros(1), 0.1, 200)
        assert np.all(trajectory.phases > -np.pi)
        assert np.all(trajectory.phases <= np.pi)


class TestMeanField:
    def test_aligned_phases(self):
        field = mean_field(np.full(5, 0.9))
        assert abs(field.rho - 1.0) < 1e-12
        assert abs(field.Phi - 0.9) < 1e-12

    def test_evenly_spaced_phases_cancel(self):
        field = mean_field(2.0 * np.pi * np.arange(8) / 8)
        assert field.rho < 1e-12

    def test_quarter_turn_pair(self):
        field = mean_field(np.array([0.0, np.pi / 2]))
        assert abs(field.rho - np.sqrt(2) / 2) < 1e-12
        assert abs(field.Phi - np.pi / 4) < 1e-12


class TestCouplingCheck:
    def test_aligned_cluster_gives_zero_vectors(self):
        network = clustered(np.zeros(4), [[0, 1, 2, 3]], kappa_intra=0.9)
        lhs, rhs1, rhs2 = mean_field_coupling_check(network, np.full(4, 0.6), 0)
        for vec in (lhs, rhs1, rhs2):
            assert np.max(np.abs(vec)) < 1e-12

    def test_quarter_turn_pair_values(self):
        network = clustered(np.zeros(2), [[0, 1]], kappa_intra=1.0)
        lhs, rhs1, rhs2 = mean_field_coupling_check(
            network, np.array([0.0, np.pi / 2]), 0
        )
        np.testing.assert_allclose(lhs, [1.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(rhs1, [1.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(rhs2, [2.0, -2.0], atol=1e-12)

    def test_exact_sum_equals_factor_one_reduction(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            size = int(rng.integers(2, 9))
            network = clustered(
                np.zeros(size), [np.arange(size)], kappa_intra=float(rng.uniform(0.1, 2))
            )
            phases = rng.uniform(-np.pi, np.pi, size)
            lhs, rhs1, rhs2 = mean_field_coupling_check(network, phases, 0)
            assert np.max(np.abs(lhs - rhs1)) < 1e-12
            # the factor-2 variant misses by exactly the coupling itself
            assert np.max(np.abs(lhs - rhs2)) == pytest.approx(
                np.max(np.abs(lhs)), rel=1e-9
            )

    def test_nonuniform_coupling_rejected(self):
        kappa = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 1.0], [0.5, 1.0, 0.0]])
        network = OscillatorNetwork(np.zeros(3), kappa, ([0, 1, 2],))
        with pytest.raises(ValueError, match="not uniform"):
            mean_field_coupling_check(network, np.zeros(3), 0)

    def test_external_coupling_rejected(self):
        network = clustered(np.zeros(4), [[0, 1], [2, 3]], kappa_intra=1.0,
                            kappa_inter=0.2)
        with pytest.raises(ValueError, match="external"):
            mean_field_coupling_check(network, np.zeros(4), 0)

    def test_global_shift_rotates_mean_angle_only(self):
        rng = np.random.default_rng(4)
        phases = rng.uniform(-np.pi, np.pi, 6)
        shift = 1.1
        base = mean_field(phases)
        moved = mean_field(phases + shift)
        assert abs(moved.rho - base.rho) < 1e-12
        assert circular_gap(moved.Phi, base.Phi + shift) < 1e-12


class TestSynthAndMix:
    def test_unit_mode_constant_frequency_is_pure_cosine(self):
        network = clustered(np.array([2.0]), [[0]], kappa_intra=0.0)
        dt, n_samples = 0.05, 400
        trajectory = simulate(network, np.array([0.7]), dt, n_samples)
        sources = synth_sources(trajectory)
        expected = np.cos(0.7 + 2.0 * np.arange(n_samples) * dt)
        assert np.max(np.abs(sources.data[0] - expected)) < 1e-9

    def test_roundtrip_phases_through_analytic(self):
        rng = np.random.default_rng(5)
        network = clustered(np.array([0.9, 1.5]), [[0], [1]], kappa_intra=0.0)
        n_samples = 4000
        trajectory = simulate(network, rng.uniform(-np.pi, np.pi, 2), 0.05, n_samples)
        sources = synth_sources(trajectory, mode="smooth_random", seed=8)
        trim = n_samples // 20
        recovered = analytic(sources.data).trimmed(trim).phase
        true = trajectory.phases[:, trim:n_samples - trim]
        assert np.max(circular_gap(recovered, true)) < 0.05
        for i in range(2):
            assert plv(recovered[i], true[i]).magnitude > 0.99

    def test_smooth_random_is_seed_deterministic_and_bounded(self):
        network = clustered(np.array([1.0, 1.3]), [[0], [1]], kappa_intra=0.0)
        trajectory = simulate(network, np.zeros(2), 0.05, 1000)
        a = synth_sources(trajectory, mode="smooth_random", seed=3)
        b = synth_sources(trajectory, mode="smooth_random", seed=3)
        assert np.array_equal(a.data, b.data)
        envelope = np.abs(a.data) / np.maximum(np.abs(np.cos(trajectory.phases)), 1e-12)
        # envelope bound checked where the carrier is not near a zero crossing
        strong = np.abs(np.cos(trajectory.phases)) > 0.5
        assert envelope[strong].max() <= 1.5 + 1e-9
        assert envelope[strong].min() >= 0.5 - 1e-9

    def test_identity_mixing_is_noop(self):
        network = clustered(np.array([1.0, 2.0]), [[0], [1]], kappa_intra=0.0)
        sources = synth_sources(simulate(network, np.zeros(2), 0.1, 100))
        assert np.array_equal(mix(sources, np.eye(2)).data, sources.data)

    def test_positive_diagonal_mixing_preserves_phases(self):
        rng = np.random.default_rng(6)
        network = clustered(np.array([0.8, 1.4]), [[0], [1]], kappa_intra=0.0)
        sources = synth_sources(simulate(network, rng.uniform(-3, 3, 2), 0.05, 2000))
        mixed = mix(sources, np.diag([2.5, 0.3]))
        original = analytic(sources.data).phase
        scaled = analytic(mixed.data).phase
        assert np.max(circular_gap(original, scaled)) < 1e-10

    def test_mix_unmix_roundtrip(self):
        rng = np.random.default_rng(7)
        network = clustered(np.array([1.0, 1.7]), [[0], [1]], kappa_intra=0.0)
        sources = synth_sources(simulate(network, np.zeros(2), 0.05, 500))
        m = np.array([[1.1, 0.4], [0.2, 0.9]])
        roundtrip = mix(mix(sources, m), np.linalg.inv(m))
        assert np.max(np.abs(roundtrip.data - sources.data)) < 1e-10

    def test_singular_mixing_rejected(self):
        network = clustered(np.array([1.0, 1.0]), [[0, 1]], kappa_intra=0.0)
        sources = synth_sources(simulate(network, np.zeros(2), 0.1, 50))
        with pytest.raises(SingularMatrixError):
            mix(sources, np.array([[1.0, 2.0], [2.0, 4.0]]))


class TestNetworkValidation:
    def test_partition_must_cover_exactly(self):
        with pytest.raises(ValueError, match="partition"):
            OscillatorNetwork(np.zeros(3), np.zeros((3, 3)), ([0, 1],))
        with pytest.raises(ValueError, match="partition"):
            OscillatorNetwork(np.zeros(3), np.zeros((3, 3)), ([0, 1], [1, 2]))

    def test_nonzero_diagonal_rejected(self):
        kappa = np.eye(2)
        with pytest.raises(ValueError, match="diagonal"):
            OscillatorNetwork(np.zeros(2), kappa, ([0, 1],))

    def test_clustered_builder_fills_blocks(self):
        network = clustered(np.zeros(5), [[0, 1, 2], [3, 4]], 0.7, 0.1)
        assert network.kappa[0, 1] == 0.7
        assert network.kappa[3, 4] == 0.7
        assert network.kappa[0, 3] == 0.1
        assert np.all(np.diagonal(network.kappa) == 0.0)
