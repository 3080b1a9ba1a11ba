"""Gate-level simulation of dilation-form models and measurement protocols.

Trajectory sampling applies the dilation unitary to state (x) reset
emission, rotates the emission register into the measurement basis,
samples a computational outcome (Born rule, exact projective collapse),
records the mapped symbol and resets the emission register.  On top of
that sit the SWAP-test overlap estimator, X/Y/Z single-qubit tomography
with Bloch-vector reconstruction, and the projected kernel computed from
(reduced) density matrices.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels, linalg, metrics, qhmm

PROB_FLOOR = 1e-6

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


class PostSelectionError(RuntimeError):
    """Could not collect enough accepted trajectories for a sequence."""


@dataclass(frozen=True)
class ShotRecord:
    shots: int
    counts: dict  # outcome sequence -> count


@dataclass(frozen=True)
class BlochVector:
    rx: float
    ry: float
    rz: float

    @property
    def norm(self):
        return float(np.sqrt(self.rx ** 2 + self.ry ** 2 + self.rz ** 2))


def check_pure_state(vec, tol=1e-10):
    vec = np.asarray(vec, dtype=np.complex128)
    if vec.ndim != 1:
        raise ValueError("state vector must be 1-D")
    if abs(np.linalg.norm(vec) - 1.0) > tol:
        raise ValueError("state vector is not normalized")
    return vec


def _initial_vectors(u, n_shots, rng):
    """Purify the initial density operator: sample eigenvectors by weight."""
    w, v = linalg.hermitian_eig(u.initial_state)
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    comps = rng.choice(len(w), size=n_shots, p=w)
    return v[:, comps].T.copy()


def _sample_trajectories(u, steps, n_shots, rng):
    """Batched trajectory sampling; returns (symbol sequences, final states)."""
    n, m = u.state_dim, u.emission_dim
    psi = _initial_vectors(u, n_shots, rng)
    basis_conj = u.basis.conj()
    symbol_of = np.array([u.partition[e] for e in range(m)])
    recorded = []
    for _ in range(steps):
        x = np.zeros((n_shots, n * m), dtype=np.complex128)
        x[:, np.arange(n) * m + u.reset_index] = psi
        y = x @ u.unitary.T
        amps = y.reshape(n_shots, n, m) @ basis_conj
        probs = np.sum(np.abs(amps) ** 2, axis=1)
        probs = probs / probs.sum(axis=1, keepdims=True)
        draws = rng.random(n_shots)
        outcomes = (np.cumsum(probs, axis=1) < draws[:, None]).sum(axis=1)
        outcomes = np.minimum(outcomes, m - 1)
        picked = amps[np.arange(n_shots), :, outcomes]
        norms = np.linalg.norm(picked, axis=1, keepdims=True)
        psi = picked / norms
        recorded.append(symbol_of[outcomes])
    seqs = np.array(["".join(chars) for chars in zip(*recorded)]) if steps else \
        np.array([""] * n_shots)
    return seqs, psi


def run_trajectory(u, steps, shots=None, rng=None):
    """Simulate `steps` emission rounds.

    With `shots` set, returns a ShotRecord of sampled symbol sequences;
    otherwise returns the exact distribution over all length-`steps`
    sequences via the extracted Kraus channel.
    """
    if shots is None:
        q = qhmm.kraus_from_unitary(u)
        return metrics.forward_distribution(q, q.initial, steps).probs
    if rng is None:
        raise ValueError("shots mode requires an RNG")
    seqs, _ = _sample_trajectories(u, steps, shots, rng)
    uniq, counts = np.unique(seqs, return_counts=True)
    return ShotRecord(shots=shots, counts=dict(zip(uniq.tolist(), counts.tolist())))


def shot_record_to_csv(record, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["outcome", "count"])
        for outcome in sorted(record.counts):
            writer.writerow([outcome, record.counts[outcome]])


def swap_test(psi, phi, shots, rng):
    """Ancilla-interference overlap estimator 2 (r0 / R - 1/2).

    The ancilla reads 0 with probability (1 + |<phi|psi>|^2) / 2; outcomes
    are sampled binomially, so the estimator is unbiased with expectation
    equal to the squared overlap.
    """
    psi = check_pure_state(psi)
    phi = check_pure_state(phi)
    if psi.shape != phi.shape:
        raise linalg.DimensionError("state dimensions differ")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if psi is phi or np.array_equal(psi, phi):
        overlap = 1.0
    else:
        overlap = float(np.abs(np.vdot(phi, psi)) ** 2)
    p_zero = min(max(0.5 * (1.0 + overlap), 0.0), 1.0)
    r0 = rng.binomial(shots, p_zero) if p_zero < 1.0 else shots
    return 2.0 * (r0 / shots - 0.5)


def _bloch_of_density(rho):
    return (
        float(np.trace(rho @ PAULI_X).real),
        float(np.trace(rho @ PAULI_Y).real),
        float(np.trace(rho @ PAULI_Z).real),
    )


def pauli_expectations(rho, shots_per_basis, rng):
    """Estimate the Bloch vector of a single-qubit state by X/Y/Z counts.

    X: Hadamard then measure; Y: S-dagger, Hadamard, measure; Z: measure.
    Each component is (n0 - n1) / shots for its basis.
    """
    rho = qhmm.check_density(rho)
    if rho.shape != (2, 2):
        raise linalg.DimensionError("tomography target must be a single qubit")
    estimates = []
    for exact in _bloch_of_density(rho):
        p_zero = min(max(0.5 * (1.0 + exact), 0.0), 1.0)
        n0 = rng.binomial(shots_per_basis, p_zero)
        estimates.append((2.0 * n0 - shots_per_basis) / shots_per_basis)
    return BlochVector(*estimates)


def reconstruct_density(bloch):
    """rho = (I + rx X + ry Y + rz Z) / 2, shrinking r onto the Bloch ball.

    Shot noise can push the measured vector outside the ball; scaling to
    unit norm preserves direction and guarantees a valid state.
    """
    r = np.array([bloch.rx, bloch.ry, bloch.rz], dtype=float)
    norm = np.linalg.norm(r)
    if norm > 1.0:
        r = r / norm
    rho = 0.5 * (np.eye(2, dtype=np.complex128)
                 + r[0] * PAULI_X + r[1] * PAULI_Y + r[2] * PAULI_Z)
    return rho


def projected_kernel(rho1, rho2, gamma=1.0):
    """exp(-gamma ||rho1 - rho2||_F^2)."""
    rho1 = linalg.require_square(rho1)
    rho2 = linalg.require_square(rho2)
    if rho1.shape != rho2.shape:
        raise linalg.DimensionError("state dimensions differ")
    return float(np.exp(-gamma * np.linalg.norm(rho1 - rho2) ** 2))


def reduced_qubit_states(rho):
    """Per-qubit 1-RDMs of a state on a power-of-two dimension."""
    rho = linalg.require_square(rho)
    dim = rho.shape[0]
    n_qubits = int(round(np.log2(dim)))
    if 2 ** n_qubits != dim:
        raise linalg.DimensionError(f"dimension {dim} is not a power of two")
    rdms = []
    for qubit in range(n_qubits):
        left = 2 ** qubit
        right = dim // (2 * left)
        sub = linalg.partial_trace(rho, (left, 2 * right), keep=1)
        rdms.append(linalg.partial_trace(sub, (2, right), keep=0))
    return rdms


def _qubit_expectations_pure(states, qubit, n_qubits):
    """<X>, <Y>, <Z> of one qubit for a batch of pure states."""
    batch = states.reshape(states.shape[0], 2 ** qubit, 2, -1)
    # r01 = conj(rdm[0, 1]) summed over the spectator indices
    r01 = np.einsum("bljr,bljr->b", batch[:, :, 0:1, :].conj(), batch[:, :, 1:2, :])
    p0 = np.sum(np.abs(batch[:, :, 0, :]) ** 2, axis=(1, 2))
    p1 = np.sum(np.abs(batch[:, :, 1, :]) ** 2, axis=(1, 2))
    ex = 2.0 * r01.real
    ey = 2.0 * r01.imag
    ez = p0 - p1
    return ex, ey, ez


def _tomography_from_states(states, n_qubits, shots_per_basis, rng):
    """Single-shot X/Y/Z measurements over post-selected pure states.

    The accepted copies are split into three groups, one per basis; each
    copy contributes one outcome per qubit in its group's basis.
    """
    groups = np.array_split(np.arange(states.shape[0]), 3)
    rdms = []
    for qubit in range(n_qubits):
        components = []
        for axis, idx in enumerate(groups):
            ex, ey, ez = _qubit_expectations_pure(states[idx], qubit, n_qubits)
            exact = (ex, ey, ez)[axis]
            p_zero = np.clip(0.5 * (1.0 + exact), 0.0, 1.0)
            outcomes = rng.random(idx.size) < p_zero
            n0 = int(outcomes.sum())
            components.append((2.0 * n0 - idx.size) / idx.size)
        rdms.append(reconstruct_density(BlochVector(*components)))
    return rdms


def _collect_postselected(u, sequence, n_needed, rng, probability):
    accepted = []
    n_have = 0
    attempts = 0
    max_attempts = int(10 * n_needed / probability) + 10000
    batch = min(max(int(2 * n_needed / probability), 1000), 200000)
    while n_have < n_needed and attempts < max_attempts:
        seqs, states = _sample_trajectories(u, len(sequence), batch, rng)
        mask = seqs == sequence
        accepted.append(states[mask])
        n_have += int(mask.sum())
        attempts += batch
    if n_have < n_needed:
        raise PostSelectionError(
            f"accepted {n_have}/{n_needed} trajectories for {sequence!r}"
        )
    return np.concatenate(accepted)[:n_needed]


def projected_kernel_matrix(model, sequences, gamma=1.0, shots_per_basis=None,
                            rng=None, prob_floor=PROB_FLOOR):
    """Pairwise projected kernel over per-qubit 1-RDMs of sequence states.

    Exact mode (shots_per_basis None) computes the reduced states from the
    channel's feature map.  Shots mode post-selects trajectories emitting
    each sequence, runs per-qubit tomography on the accepted final states
    and reconstructs the RDMs.  Sequences with probability below
    `prob_floor` are skipped and reported.

    Returns (GramMatrix over the kept sequences, list of skipped sequences).
    """
    if isinstance(model, qhmm.UnitaryQhmm):
        unitary_model = model
        channel = qhmm.kraus_from_unitary(model)
    else:
        unitary_model = None
        channel = model
    dim = channel.dim
    n_qubits = int(round(np.log2(dim)))
    if 2 ** n_qubits != dim:
        raise linalg.DimensionError("state dimension must be a power of two")
    kept, skipped, rdm_lists = [], [], []
    for y in sequences:
        p = qhmm.sequence_probability(channel, y)
        if p < prob_floor:
            skipped.append(y)
            continue
        if shots_per_basis is None:
            rho = kernels.phi_predictive(channel, y)
            rdm_lists.append(reduced_qubit_states(rho))
        else:
            if unitary_model is None:
                raise ValueError("shots mode requires a dilation-form model")
            if rng is None:
                raise ValueError("shots mode requires an RNG")
            states = _collect_postselected(
                unitary_model, y, 3 * shots_per_basis, rng, p
            )
            rdm_lists.append(
                _tomography_from_states(states, n_qubits, shots_per_basis, rng)
            )
        kept.append(y)
    n = len(kept)
    values = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            sq = sum(
                np.linalg.norm(a - b) ** 2
                for a, b in zip(rdm_lists[i], rdm_lists[j])
            )
            values[i, j] = values[j, i] = np.exp(-gamma * sq)
    min_eig = float(np.linalg.eigvalsh(values)[0]) if n else 0.0
    gm = kernels.GramMatrix(
        labels=kept, values=values, min_eigenvalue_raw=min_eig, repaired=False
    )
    return gm, skipped
