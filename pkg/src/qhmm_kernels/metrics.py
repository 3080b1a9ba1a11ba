"""State divergences and distribution distances, plus executable bound checks.

Trace distance D = (1/2) tr|r1 - r2|, fidelity F = (tr sqrt(sqrt(r1) r2
sqrt(r1)))^2, and the divergence B = 2 - 2 sqrt(F) derived from it.  The
total-variation distance between forward distributions is the supremum of
pointwise absolute differences (the convention used in the divergence
bounds), with the 1/2-L1 form available separately as a diagnostic.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg, qhmm

ENUMERATION_CAP = 2 ** 20


def _require_same_dim(r1, r2):
    r1 = linalg.require_square(r1)
    r2 = linalg.require_square(r2)
    if r1.shape != r2.shape:
        raise linalg.DimensionError(f"state dims differ: {r1.shape} vs {r2.shape}")
    return r1, r2


def trace_distance(r1, r2):
    r1, r2 = _require_same_dim(r1, r2)
    # canonical operand order makes the result bitwise symmetric
    if r2.tobytes() < r1.tobytes():
        r1, r2 = r2, r1
    w = np.linalg.eigvalsh(0.5 * ((r1 - r2) + (r1 - r2).conj().T))
    return float(0.5 * np.abs(w).sum())


def fidelity(r1, r2):
    r1, r2 = _require_same_dim(r1, r2)
    s = linalg.sqrt_psd(r1)
    inner = s @ r2 @ s
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = float(np.sqrt(np.clip(w, 0.0, None)).sum() ** 2)
    return min(max(f, 0.0), 1.0)


def bures(r1, r2):
    """Divergence 2 - 2 sqrt(F); ranges over [0, 2]."""
    return 2.0 - 2.0 * np.sqrt(fidelity(r1, r2))


@dataclass(frozen=True)
class ForwardDistribution:
    horizon: int
    probs: dict  # sequence -> probability

    def __post_init__(self):
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"forward distribution sums to {total}")


def forward_distribution(q, rho, k):
    """Exact distribution of all length-k continuations from state rho."""
    m = len(q.alphabet)
    if m ** k > ENUMERATION_CAP:
        raise ValueError(f"enumeration of {m}^{k} continuations exceeds cap")
    out = {}

    def rec(prefix, vec):
        if len(prefix) == k:
            out[prefix] = float(vec.reshape(q.dim, q.dim).trace().real)
            return
        for a in q.alphabet:
            rec(prefix + a, q.superoperator(a) @ vec)

    rec("", np.asarray(rho, dtype=np.complex128).reshape(-1))
    return ForwardDistribution(horizon=k, probs=out)


def total_variation(d1, d2):
    """sup_z |P1(z) - P2(z)| over the common horizon."""
    if d1.horizon != d2.horizon:
        raise ValueError("horizon mismatch")
    keys = set(d1.probs) | set(d2.probs)
    return max(abs(d1.probs.get(z, 0.0) - d2.probs.get(z, 0.0)) for z in keys)


def half_l1_distance(d1, d2):
    """(1/2) sum_z |P1(z) - P2(z)|; diagnostic alternative convention."""
    if d1.horizon != d2.horizon:
        raise ValueError("horizon mismatch")
    keys = set(d1.probs) | set(d2.probs)
    return 0.5 * sum(abs(d1.probs.get(z, 0.0) - d2.probs.get(z, 0.0)) for z in keys)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


def check_forward_divergence_bound(q, rho1, rho2, k, slack=1e-9):
    """sup-TV of the k-step forward distributions vs 2 x trace distance."""
    lhs = total_variation(
        forward_distribution(q, rho1, k), forward_distribution(q, rho2, k)
    )
    rhs = 2.0 * trace_distance(rho1, rho2)
    return BoundCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + slack)


def _state_after(q, y):
    rho = q.initial
    if y:
        rho = qhmm.generating_states(q, y)[-1]
    return rho


def predictive_class_distribution(q, labeler, y, k):
    """p(y, k, c) = sum_z P[z | y] 1[labeler(y z) = c] for c in {0, 1}."""
    dist = forward_distribution(q, _state_after(q, y), k)
    probs = np.zeros(2)
    for z, p in dist.probs.items():
        probs[int(labeler(y + z))] += p
    return probs


def check_predictive_classification_bound(q, labeler, y1, y2, k, slack=1e-9):
    """Class-distribution divergence vs the 2 |Sigma|^k x trace-distance bound.

    Uses the weakened bound with the map-dependent constant set to 1.
    """
    p1 = predictive_class_distribution(q, labeler, y1, k)
    p2 = predictive_class_distribution(q, labeler, y2, k)
    lhs = float(np.abs(p1 - p2).max())
    n_continuations = len(q.alphabet) ** k
    rhs = 2.0 * n_continuations * trace_distance(_state_after(q, y1), _state_after(q, y2))
    return BoundCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + slack)
