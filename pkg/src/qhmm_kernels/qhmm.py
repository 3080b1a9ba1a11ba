"""Quantum hidden Markov models as symbol-labeled Kraus channels.

A model is a CPTP map whose Kraus operators are grouped by observable
symbol.  Applying the channel to a state yields a symbol with probability
tr(sum_j K_j rho K_j^dag) and the renormalized branch as the new state.
The unitary-dilation form (a unitary on state x emission followed by a
basis measurement of the emission register) is converted to Kraus form
with T_e = (I (x) <e~|) U (I (x) |e0>).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg

COMPLETENESS_TOL = 1e-10
DENSITY_TOL = 1e-10
IMPOSSIBLE_PROB = 1e-12


class ImpossibleSequenceError(ValueError):
    """A symbol or sequence with probability at the numeric noise floor."""


class InvalidModelError(ValueError):
    pass


def check_density(rho, tol=DENSITY_TOL):
    """Validate Hermiticity, positivity and unit trace; returns the array."""
    rho = linalg.require_hermitian(rho, tol)
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w[0] < -tol:
        raise InvalidModelError(f"density operator eigenvalue {w[0]:.3e} < -{tol:.1e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise InvalidModelError(f"density operator trace {tr} != 1")
    return rho


def maximally_mixed(dim):
    return np.eye(dim, dtype=np.complex128) / dim


def pure_density(vec):
    vec = np.asarray(vec, dtype=np.complex128)
    vec = vec / np.linalg.norm(vec)
    return np.outer(vec, vec.conj())


@dataclass
class Qhmm:
    """Channel-form QHMM: one Kraus set per symbol plus an initial state."""

    alphabet: tuple
    dim: int
    channels: dict  # symbol -> tuple of (dim x dim) Kraus operators
    initial: np.ndarray

    _superops: dict = field(default_factory=dict, repr=False, compare=False)
    _trace_rows: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.alphabet = tuple(self.alphabet)
        chans = {}
        for a in self.alphabet:
            if a not in self.channels or not len(self.channels[a]):
                raise InvalidModelError(f"symbol {a!r} has no Kraus operators")
            ops = tuple(
                linalg.as_complex_matrix(k).reshape(self.dim, self.dim)
                for k in self.channels[a]
            )
            chans[a] = ops
        self.channels = chans
        self.initial = check_density(self.initial)
        if self.initial.shape[0] != self.dim:
            raise InvalidModelError("initial state dimension mismatch")

    def superoperator(self, a):
        """Row-major-vec superoperator of the per-symbol sub-channel."""
        if a not in self._superops:
            s = sum(np.kron(k, k.conj()) for k in self.channels[a])
            self._superops[a] = s
            eye = np.eye(self.dim, dtype=np.complex128).reshape(-1)
            self._trace_rows[a] = eye @ s
        return self._superops[a]

    def trace_row(self, a):
        self.superoperator(a)
        return self._trace_rows[a]


@dataclass(frozen=True)
class UnitaryQhmm:
    """Dilation-form QHMM (Stinespring picture).

    `unitary` acts on the composite space with the state index high-order
    (index = s * emission_dim + e).  `basis` columns are the measurement
    basis of the emission register; `partition` maps emission basis index
    to an observable symbol; `reset_index` is the emission reset state.
    """

    alphabet: tuple
    state_dim: int
    emission_dim: int
    unitary: np.ndarray
    basis: np.ndarray = None
    partition: dict = None
    reset_index: int = 0
    initial_state: np.ndarray = None

    def __post_init__(self):
        n, m = self.state_dim, self.emission_dim
        u = linalg.as_complex_matrix(self.unitary)
        if u.shape != (n * m, n * m):
            raise InvalidModelError(f"unitary shape {u.shape} != {(n * m, n * m)}")
        if linalg.frobenius_norm(u @ u.conj().T - np.eye(n * m)) > 1e-10 * n * m:
            raise InvalidModelError("U is not unitary within tolerance")
        basis = self.basis if self.basis is not None else np.eye(m)
        basis = linalg.as_complex_matrix(basis)
        if linalg.frobenius_norm(basis @ basis.conj().T - np.eye(m)) > 1e-10 * m:
            raise InvalidModelError("measurement basis is not unitary")
        part = dict(self.partition) if self.partition is not None else {
            i: self.alphabet[i % len(self.alphabet)] for i in range(m)
        }
        if set(part.keys()) != set(range(m)):
            raise InvalidModelError("partition must cover every emission index")
        if set(part.values()) != set(self.alphabet):
            raise InvalidModelError("every symbol needs at least one emission index")
        if not 0 <= self.reset_index < m:
            raise InvalidModelError("reset index out of range")
        rho0 = self.initial_state
        rho0 = maximally_mixed(n) if rho0 is None else check_density(rho0)
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "partition", part)
        object.__setattr__(self, "initial_state", rho0)


@dataclass(frozen=True)
class ChannelDiagnostics:
    completeness_deviation: float
    max_subchannel_excess: float
    passed: bool


def validate(q, tol=COMPLETENESS_TOL):
    """Check Kraus completeness and that each sub-channel is trace-non-increasing."""
    total = np.zeros((q.dim, q.dim), dtype=np.complex128)
    max_excess = 0.0
    for a in q.alphabet:
        sub = sum(k.conj().T @ k for k in q.channels[a])
        total += sub
        w = np.linalg.eigvalsh(0.5 * (sub + sub.conj().T))
        max_excess = max(max_excess, float(w[-1]) - 1.0)
    deviation = linalg.frobenius_norm(total - np.eye(q.dim))
    return ChannelDiagnostics(
        completeness_deviation=deviation,
        max_subchannel_excess=max_excess,
        passed=deviation <= tol and max_excess <= tol,
    )


def branch(q, rho, a):
    """Unnormalized sub-channel application sum_j K_j rho K_j^dag."""
    if a not in q.channels:
        raise KeyError(f"symbol {a!r} not in alphabet")
    s = q.superoperator(a)
    return (s @ np.asarray(rho, dtype=np.complex128).reshape(-1)).reshape(q.dim, q.dim)


def apply_symbol(q, rho, a):
    """Measure one symbol: returns (post-measurement state, probability)."""
    b = branch(q, rho, a)
    p = float(np.trace(b).real)
    if p <= IMPOSSIBLE_PROB:
        raise ImpossibleSequenceError(f"symbol {a!r} has probability {p:.3e}")
    post = b / p
    return 0.5 * (post + post.conj().T), p


def symbol_probabilities(q, rho):
    vec = np.asarray(rho, dtype=np.complex128).reshape(-1)
    return np.array([float((q.trace_row(a) @ vec).real) for a in q.alphabet])


def sequence_probability(q, y):
    vec = q.initial.reshape(-1)
    for a in y:
        vec = q.superoperator(a) @ vec
    rho = vec.reshape(q.dim, q.dim)
    return float(np.trace(rho).real)


def generating_states(q, y):
    """Normalized post-measurement states visited while emitting y."""
    states = []
    rho = q.initial
    for a in y:
        rho, _ = apply_symbol(q, rho, a)
        states.append(rho)
    return states


def conditional_next_distribution(q, y):
    """P[a | y] for each symbol a, as a dict."""
    p_y = sequence_probability(q, y)
    if p_y <= IMPOSSIBLE_PROB:
        raise ImpossibleSequenceError(f"prefix {y!r} has probability {p_y:.3e}")
    return {a: sequence_probability(q, y + a) / p_y for a in q.alphabet}


def sample(q, length, rng):
    """Draw one sequence by per-step Born-rule symbol draws."""
    rho = q.initial
    symbols = []
    for _ in range(length):
        probs = symbol_probabilities(q, rho)
        probs = np.clip(probs, 0.0, None)
        probs = probs / probs.sum()
        idx = rng.choice(len(q.alphabet), p=probs)
        a = q.alphabet[idx]
        rho, _ = apply_symbol(q, rho, a)
        symbols.append(a)
    return "".join(symbols)


def embed_hmm(model):
    """Exact diagonal embedding of a classical HMM.

    Kraus elements sqrt(B[a,i] * A[j,i]) |j><i| reproduce the classical
    forward algorithm on diagonal states; the initial state is diag(x0).
    """
    n = model.n_states
    channels = {}
    for idx, a in enumerate(model.alphabet):
        ops = []
        for i in range(n):
            for j in range(n):
                w = model.emission[idx, i] * model.transition[j, i]
                if w == 0.0:
                    continue
                k = np.zeros((n, n), dtype=np.complex128)
                k[j, i] = np.sqrt(w)
                ops.append(k)
        if not ops:
            ops.append(np.zeros((n, n), dtype=np.complex128))
        channels[a] = tuple(ops)
    return Qhmm(
        alphabet=model.alphabet,
        dim=n,
        channels=channels,
        initial=np.diag(model.initial).astype(np.complex128),
    )


def kraus_from_unitary(u):
    """Extract the symbol-grouped Kraus channel of a dilation-form model."""
    n, m = u.state_dim, u.emission_dim
    blocks = u.unitary.reshape(n, m, n, m)[:, :, :, u.reset_index]  # [s', e', s]
    grouped = {a: [] for a in u.alphabet}
    for e in range(m):
        k = np.tensordot(u.basis[:, e].conj(), blocks, axes=([0], [1]))
        grouped[u.partition[e]].append(k)
    channels = {}
    for a in u.alphabet:
        ops = grouped[a]
        if not ops:
            ops = [np.zeros((n, n), dtype=np.complex128)]
        channels[a] = tuple(ops)
    return Qhmm(alphabet=u.alphabet, dim=n, channels=channels, initial=u.initial_state)


def haar_unitary(dim, rng):
    """Haar-random unitary via QR with phase-fixed R diagonal."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    qm, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return qm * (d / np.abs(d))


def random_qhmm(state_dim, emission_dim, alphabet, rng, partition=None, basis=None,
                initial_state=None):
    """Haar-random dilation-form model; initial state maximally mixed by default."""
    alphabet = tuple(alphabet)
    if emission_dim < len(alphabet):
        raise InvalidModelError("emission dimension smaller than alphabet")
    u = haar_unitary(state_dim * emission_dim, rng)
    return UnitaryQhmm(
        alphabet=alphabet,
        state_dim=state_dim,
        emission_dim=emission_dim,
        unitary=u,
        basis=basis,
        partition=partition,
        reset_index=0,
        initial_state=initial_state,
    )


def _matrix_to_json(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=np.complex128)]


def _matrix_from_json(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def save(q, path):
    doc = {
        "alphabet": list(q.alphabet),
        "dim": q.dim,
        "channels": [
            {"symbol": a, "kraus": [_matrix_to_json(k) for k in q.channels[a]]}
            for a in q.alphabet
        ],
        "initial": _matrix_to_json(q.initial),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load(path):
    with open(path) as fh:
        doc = json.load(fh)
    channels = {
        c["symbol"]: tuple(_matrix_from_json(k) for k in c["kraus"])
        for c in doc["channels"]
    }
    return Qhmm(
        alphabet=tuple(doc["alphabet"]),
        dim=doc["dim"],
        channels=channels,
        initial=_matrix_from_json(doc["initial"]),
    )


def save_unitary(u, path):
    doc = {
        "alphabet": list(u.alphabet),
        "state_dim": u.state_dim,
        "emission_dim": u.emission_dim,
        "unitary": _matrix_to_json(u.unitary),
        "basis": _matrix_to_json(u.basis),
        "partition": {str(k): v for k, v in u.partition.items()},
        "reset_index": u.reset_index,
        "initial_state": _matrix_to_json(u.initial_state),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_unitary(path):
    with open(path) as fh:
        doc = json.load(fh)
    return UnitaryQhmm(
        alphabet=tuple(doc["alphabet"]),
        state_dim=doc["state_dim"],
        emission_dim=doc["emission_dim"],
        unitary=_matrix_from_json(doc["unitary"]),
        basis=_matrix_from_json(doc["basis"]),
        partition={int(k): v for k, v in doc["partition"].items()},
        reset_index=doc["reset_index"],
        initial_state=_matrix_from_json(doc["initial_state"]),
    )
