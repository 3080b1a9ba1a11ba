"""Trajectory sampling, SWAP test, tomography and the projected kernel."""

import numpy as np
import pytest

from qhmm_kernels import circuits, hmm, linalg, metrics, qhmm


def _random_pure(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _random_density(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return m / np.trace(m).real


def test_exact_mode_matches_channel_distribution():
    rng = np.random.default_rng(0)
    u = qhmm.random_qhmm(2, 2, ("0", "1"), rng)
    dist = circuits.run_trajectory(u, 3)
    q = qhmm.kraus_from_unitary(u)
    expected = metrics.forward_distribution(q, q.initial, 3).probs
    assert set(dist) == set(expected)
    for y in expected:
        assert np.isclose(dist[y], expected[y], atol=1e-12)


def test_sampled_trajectories_match_exact_distribution():
    rng = np.random.default_rng(1)
    u = qhmm.random_qhmm(2, 2, ("0", "1"), rng)
    record = circuits.run_trajectory(u, 3, shots=40000, rng=rng)
    assert record.shots == 40000
    assert sum(record.counts.values()) == 40000
    exact = circuits.run_trajectory(u, 3)
    sup_tv = max(
        abs(record.counts.get(y, 0) / record.shots - p) for y, p in exact.items()
    )
    assert sup_tv < 0.015


def test_trajectory_sampling_with_nontrivial_basis_and_mixed_initial():
    rng = np.random.default_rng(2)
    basis = qhmm.haar_unitary(2, rng)
    u = qhmm.random_qhmm(3, 2, ("0", "1"), rng, basis=basis)
    record = circuits.run_trajectory(u, 2, shots=40000, rng=rng)
    exact = circuits.run_trajectory(u, 2)
    sup_tv = max(
        abs(record.counts.get(y, 0) / record.shots - p) for y, p in exact.items()
    )
    assert sup_tv < 0.015


def test_run_trajectory_requires_rng_in_shots_mode():
    rng = np.random.default_rng(3)
    u = qhmm.random_qhmm(2, 2, ("0", "1"), rng)
    with pytest.raises(ValueError):
        circuits.run_trajectory(u, 2, shots=10)


def test_swap_test_identical_states_is_exactly_one():
    rng = np.random.default_rng(4)
    psi = _random_pure(rng, 4)
    assert circuits.swap_test(psi, psi, 100, rng) == 1.0
    assert circuits.swap_test(psi, psi.copy(), 100, rng) == 1.0


def test_swap_test_is_unbiased():
    rng = np.random.default_rng(5)
    psi = _random_pure(rng, 4)
    phi = _random_pure(rng, 4)
    exact = abs(np.vdot(phi, psi)) ** 2
    n_est, shots = 400, 1000
    estimates = [circuits.swap_test(psi, phi, shots, rng) for _ in range(n_est)]
    mean = np.mean(estimates)
    # Var of one estimate is (1 - exact^2) / shots
    se = np.sqrt((1.0 - exact ** 2) / shots / n_est)
    assert abs(mean - exact) < 4 * se


def test_swap_test_validates_inputs():
    rng = np.random.default_rng(6)
    psi = _random_pure(rng, 2)
    with pytest.raises(ValueError):
        circuits.swap_test(psi * 2.0, psi, 10, rng)
    with pytest.raises(linalg.DimensionError):
        circuits.swap_test(psi, _random_pure(rng, 4), 10, rng)
    with pytest.raises(ValueError):
        circuits.swap_test(psi, psi, 0, rng)


def test_tomography_round_trip_high_shots():
    rng = np.random.default_rng(7)
    rho = _random_density(rng, 2)
    bloch = circuits.pauli_expectations(rho, 200000, rng)
    recon = circuits.reconstruct_density(bloch)
    assert np.linalg.norm(recon - rho) < 0.02
    qhmm.check_density(recon)


def test_pauli_expectations_match_exact_on_eigenstates():
    rng = np.random.default_rng(8)
    z_up = np.diag([1.0, 0.0]).astype(complex)
    bloch = circuits.pauli_expectations(z_up, 1000, rng)
    assert bloch.rz == 1.0  # deterministic outcome


def test_reconstruct_density_shrinks_to_bloch_ball():
    noisy = circuits.BlochVector(rx=0.9, ry=0.8, rz=0.7)
    assert noisy.norm > 1.0
    rho = circuits.reconstruct_density(noisy)
    qhmm.check_density(rho)
    w = np.linalg.eigvalsh(rho)
    assert w[0] >= -1e-12


def test_projected_kernel_formula():
    rng = np.random.default_rng(9)
    r1 = _random_density(rng, 2)
    r2 = _random_density(rng, 2)
    assert circuits.projected_kernel(r1, r1) == 1.0
    expected = np.exp(-np.linalg.norm(r1 - r2) ** 2)
    assert np.isclose(circuits.projected_kernel(r1, r2), expected, atol=1e-12)
    assert np.isclose(
        circuits.projected_kernel(r1, r2, gamma=2.0), expected ** 2, atol=1e-12
    )


def test_reduced_qubit_states_of_product_state():
    rng = np.random.default_rng(10)
    a = _random_density(rng, 2)
    b = _random_density(rng, 2)
    rdms = circuits.reduced_qubit_states(np.kron(a, b))
    assert len(rdms) == 2
    assert np.allclose(rdms[0], a, atol=1e-10)
    assert np.allclose(rdms[1], b, atol=1e-10)


def test_reduced_qubit_states_rejects_non_power_of_two():
    with pytest.raises(linalg.DimensionError):
        circuits.reduced_qubit_states(np.eye(3) / 3)


def test_projected_kernel_matrix_exact_mode():
    q = qhmm.embed_hmm(hmm.market_model())
    seqs = ["00", "01", "10", "11"]
    gm, skipped = circuits.projected_kernel_matrix(q, seqs)
    assert skipped == []
    assert gm.labels == seqs
    assert np.allclose(np.diag(gm.values), 1.0, atol=1e-12)
    assert np.allclose(gm.values, gm.values.T, atol=1e-12)
    assert np.all(gm.values > 0)
    assert np.all(gm.values <= 1.0 + 1e-12)


def test_projected_kernel_matrix_skips_rare_sequences():
    q = qhmm.embed_hmm(hmm.market_model())
    seqs = ["00", "11"]
    gm, skipped = circuits.projected_kernel_matrix(q, seqs, prob_floor=0.9)
    assert skipped == seqs
    assert gm.values.shape == (0, 0)


def test_projected_kernel_matrix_shots_mode_tracks_exact():
    rng = np.random.default_rng(11)
    u = qhmm.random_qhmm(4, 2, ("0", "1"), rng)
    seqs = ["00", "01", "10", "11"]
    exact, skipped_e = circuits.projected_kernel_matrix(u, seqs)
    noisy, skipped_n = circuits.projected_kernel_matrix(
        u, seqs, shots_per_basis=4000, rng=rng
    )
    assert skipped_n == skipped_e
    assert noisy.labels == exact.labels
    assert np.max(np.abs(noisy.values - exact.values)) < 0.15


def test_projected_kernel_matrix_shots_mode_requires_dilation_and_rng():
    q = qhmm.embed_hmm(hmm.market_model())
    with pytest.raises(ValueError):
        circuits.projected_kernel_matrix(q, ["00"], shots_per_basis=10,
                                         rng=np.random.default_rng(0))
