"""Channel-form and dilation-form models, embedding and extraction oracles."""

import numpy as np
import pytest

from qhmm_kernels import hmm, metrics, qhmm


def _market_channel():
    return qhmm.embed_hmm(hmm.market_model())


def test_check_density_accepts_valid_rejects_invalid():
    qhmm.check_density(np.eye(2) / 2)
    with pytest.raises(ValueError):
        qhmm.check_density(np.eye(2))  # trace 2
    with pytest.raises(ValueError):
        qhmm.check_density(np.diag([1.5, -0.5]))  # negative eigenvalue
    with pytest.raises(ValueError):
        qhmm.check_density(np.array([[0.5, 0.5], [0.0, 0.5]]))  # not hermitian


def test_pure_density_projector():
    v = np.array([1.0, 1j]) / np.sqrt(2)
    rho = qhmm.pure_density(v)
    assert np.allclose(rho @ rho, rho, atol=1e-12)
    assert np.isclose(np.trace(rho), 1.0)


def test_embedded_market_is_complete():
    q = _market_channel()
    diag = qhmm.validate(q)
    assert diag.passed
    assert diag.completeness_deviation < 1e-10


def test_embedded_market_matches_classical_probabilities():
    m = hmm.market_model()
    q = qhmm.embed_hmm(m)
    rng = np.random.default_rng(0)
    for _ in range(20):
        y = "".join(rng.choice(["0", "1"], size=int(rng.integers(1, 8))))
        assert np.isclose(
            qhmm.sequence_probability(q, y),
            hmm.sequence_probability(m, y),
            atol=1e-12,
        )


def test_symbol_probabilities_sum_to_one():
    q = _market_channel()
    probs = qhmm.symbol_probabilities(q, q.initial)
    assert np.isclose(probs.sum(), 1.0, atol=1e-12)
    assert np.all(probs >= 0)


def test_apply_symbol_returns_normalized_density():
    q = _market_channel()
    rho, p = qhmm.apply_symbol(q, q.initial, "0")
    assert 0 < p < 1
    qhmm.check_density(rho)


def test_branch_matches_kraus_sum():
    q = _market_channel()
    rho = q.initial
    direct = sum(k @ rho @ k.conj().T for k in q.channels["1"])
    assert np.allclose(qhmm.branch(q, rho, "1"), direct, atol=1e-12)


def test_superoperator_matches_kraus_action():
    q = _market_channel()
    rng = np.random.default_rng(1)
    g = rng.normal(size=(q.dim, q.dim)) + 1j * rng.normal(size=(q.dim, q.dim))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    for a in q.alphabet:
        via_super = (q.superoperator(a) @ rho.reshape(-1)).reshape(q.dim, q.dim)
        direct = sum(k @ rho @ k.conj().T for k in q.channels[a])
        assert np.allclose(via_super, direct, atol=1e-12)


def test_generating_states_are_densities():
    q = _market_channel()
    states = qhmm.generating_states(q, "0110")
    assert len(states) == 4
    for rho in states:
        qhmm.check_density(rho)


def test_conditional_next_distribution_sums_to_one():
    q = _market_channel()
    dist = qhmm.conditional_next_distribution(q, "01")
    assert np.isclose(sum(dist.values()), 1.0, atol=1e-10)


def test_haar_unitary_is_unitary():
    rng = np.random.default_rng(2)
    u = qhmm.haar_unitary(6, rng)
    assert np.allclose(u @ u.conj().T, np.eye(6), atol=1e-10)


def test_kraus_from_unitary_matches_block_formula():
    rng = np.random.default_rng(3)
    u = qhmm.random_qhmm(3, 2, ("0", "1"), rng)
    q = qhmm.kraus_from_unitary(u)
    n, m = u.state_dim, u.emission_dim
    # oracle: T_e[i, j] = <i, e~| U |j, e0> with e~ the e-th measurement
    # basis vector and the ancilla index varying fastest
    for e in range(m):
        t = np.zeros((n, n), dtype=np.complex128)
        for i in range(n):
            bra = np.kron(np.eye(n)[i], u.basis[:, e]).conj()
            for j in range(n):
                ket = np.kron(np.eye(n)[j], np.eye(m)[u.reset_index])
                t[i, j] = bra @ u.unitary @ ket
        found = q.channels[u.partition[e]]
        assert any(np.allclose(t, k, atol=1e-12) for k in found)
    diag = qhmm.validate(q)
    assert diag.passed


def test_dilation_and_channel_give_same_distribution():
    rng = np.random.default_rng(4)
    u = qhmm.random_qhmm(4, 3, ("a", "b", "c"), rng)
    q = qhmm.kraus_from_unitary(u)
    dist = metrics.forward_distribution(q, q.initial, 3).probs
    assert np.isclose(sum(dist.values()), 1.0, atol=1e-10)


def test_sampled_frequencies_match_exact_distribution():
    q = _market_channel()
    rng = np.random.default_rng(5)
    n = 30000
    counts = {}
    for _ in range(n):
        y = qhmm.sample(q, 3, rng)
        counts[y] = counts.get(y, 0) + 1
    exact = metrics.forward_distribution(q, q.initial, 3).probs
    sup_tv = max(abs(counts.get(y, 0) / n - p) for y, p in exact.items())
    assert sup_tv < 0.012


def test_impossible_sequence_raises():
    # single state always emitting '0': '1' has probability zero
    k0 = np.array([[1.0]], dtype=np.complex128)
    k1 = np.array([[0.0]], dtype=np.complex128)
    q = qhmm.Qhmm(
        alphabet=("0", "1"),
        dim=1,
        channels={"0": (k0,), "1": (k1,)},
        initial=np.array([[1.0]], dtype=np.complex128),
    )
    with pytest.raises(qhmm.ImpossibleSequenceError):
        qhmm.apply_symbol(q, q.initial, "1")


def test_unitary_model_validation():
    rng = np.random.default_rng(6)
    good = qhmm.random_qhmm(2, 2, ("0", "1"), rng)
    with pytest.raises(qhmm.InvalidModelError):
        qhmm.UnitaryQhmm(
            alphabet=good.alphabet,
            unitary=good.unitary + 0.1,  # not unitary any more
            basis=good.basis,
            partition=good.partition,
            state_dim=good.state_dim,
            emission_dim=good.emission_dim,
        )


def test_channel_save_load_round_trip(tmp_path):
    q = _market_channel()
    path = tmp_path / "channel.json"
    qhmm.save(q, path)
    q2 = qhmm.load(path)
    assert q2.alphabet == q.alphabet
    for a in q.alphabet:
        for k1, k2 in zip(q.channels[a], q2.channels[a]):
            assert np.allclose(k1, k2, atol=1e-15)
    assert np.allclose(q2.initial, q.initial, atol=1e-15)


def test_unitary_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    u = qhmm.random_qhmm(2, 2, ("0", "1"), rng)
    path = tmp_path / "dilation.json"
    qhmm.save_unitary(u, path)
    u2 = qhmm.load_unitary(path)
    assert np.allclose(u2.unitary, u.unitary, atol=1e-15)
    assert np.allclose(u2.basis, u.basis, atol=1e-15)
    assert u2.partition == u.partition
