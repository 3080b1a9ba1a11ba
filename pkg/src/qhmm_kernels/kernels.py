"""Generative sequence kernels and Gram-matrix construction.

Two feature maps into the model's state space: the predictive map sends a
sequence to the normalized state reached after emitting it, the structural
map to the arithmetic mean of the states visited along the way.  Kernels
are exp(-distance) for the trace and Bures divergences, the raw fidelity
for the fidelity variant, and a classical RBF on symbol vectors as the
baseline.
"""

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import metrics, qhmm

FAMILIES = ("predictive", "structural", "rbf")
METRICS = ("trace", "bures", "fidelity")

PSD_FLOOR = -1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Kernel configuration: family x state metric, or the RBF baseline."""

    family: str
    metric: str = "trace"
    rbf_sigma: float = None  # None = median heuristic at Gram time
    gamma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family != "rbf" and self.metric not in METRICS:
            raise ValueError(f"unknown state metric {self.metric!r}")
        if self.rbf_sigma is not None and self.rbf_sigma <= 0:
            raise ValueError("rbf_sigma must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def name(self):
        if self.family == "rbf":
            return "rbf"
        return f"{self.family}:{self.metric}"

    @classmethod
    def parse(cls, text):
        """Parse 'family:metric' or 'rbf' as used on the command line."""
        if text == "rbf":
            return cls(family="rbf")
        family, _, metric = text.partition(":")
        return cls(family=family, metric=metric or "trace")


@dataclass
class GramMatrix:
    labels: list
    values: np.ndarray
    min_eigenvalue_raw: float
    repaired: bool
    resolved_sigma: float = None


def phi_predictive(q, y):
    """State reached after emitting y, starting from the model's initial state."""
    rho = q.initial
    for a in y:
        rho, _ = qhmm.apply_symbol(q, rho, a)
    return rho


def phi_structural(q, y):
    """Mean of the states visited while emitting y; requires |y| >= 1."""
    if not y:
        raise ValueError("structural feature map needs a non-empty sequence")
    states = qhmm.generating_states(q, y)
    return sum(states) / len(states)


def feature_state(q, spec, y):
    if spec.family == "predictive":
        return phi_predictive(q, y)
    if spec.family == "structural":
        return phi_structural(q, y)
    raise ValueError(f"kernel family {spec.family!r} has no feature state")


def state_distance(spec, rho1, rho2):
    """The distance the kernel exponentiates (1 - F for the fidelity family)."""
    if spec.metric == "trace":
        return metrics.trace_distance(rho1, rho2)
    if spec.metric == "bures":
        return metrics.bures(rho1, rho2)
    return 1.0 - metrics.fidelity(rho1, rho2)


def rbf_kernel(y1, y2, sigma):
    """exp(-||y1 - y2||^2 / (2 sigma^2)) on numeric symbol vectors."""
    if len(y1) != len(y2):
        raise ValueError("RBF kernel requires equal-length sequences")
    v1 = np.array([float(c) for c in y1])
    v2 = np.array([float(c) for c in y2])
    return float(np.exp(-np.sum((v1 - v2) ** 2) / (2.0 * sigma ** 2)))


def median_sigma(dataset):
    """Median of the nonzero pairwise Euclidean distances of the dataset."""
    vecs = np.array([[float(c) for c in y] for y in dataset])
    sq = np.sum((vecs[:, None, :] - vecs[None, :, :]) ** 2, axis=-1)
    d = np.sqrt(sq[np.triu_indices(len(dataset), k=1)])
    d = d[d > 0]
    if d.size == 0:
        return 1.0
    return float(np.median(d))


def kernel_value(q, spec, y1, y2, cache=None):
    """Pairwise kernel value; symmetric by fixed pair ordering."""
    if spec.family == "rbf":
        sigma = spec.rbf_sigma if spec.rbf_sigma is not None else 1.0
        return rbf_kernel(y1, y2, sigma)
    if y2 < y1:
        y1, y2 = y2, y1
    r1 = _cached_state(q, spec, y1, cache)
    r2 = _cached_state(q, spec, y2, cache)
    d = state_distance(spec, r1, r2)
    if spec.metric == "fidelity":
        return 1.0 - d
    return float(np.exp(-d))


def _cached_state(q, spec, y, cache):
    if cache is None:
        return feature_state(q, spec, y)
    key = (spec.family, y)
    if key not in cache:
        cache[key] = feature_state(q, spec, y)
    return cache[key]


def _repair_psd(values):
    w, v = np.linalg.eigh(values)
    clipped = (v * np.clip(w, 0.0, None)) @ v.T
    return 0.5 * (clipped + clipped.T)


def gram(q, spec, dataset, state_cache=None):
    """Symmetric kernel matrix over a dataset, with PSD repair if needed.

    Raises on any sequence that is impossible under the model, identifying
    it by dataset index.
    """
    n = len(dataset)
    resolved_sigma = None
    if spec.family == "rbf":
        resolved_sigma = spec.rbf_sigma
        if resolved_sigma is None:
            resolved_sigma = median_sigma(dataset)
        vecs = np.array([[float(c) for c in y] for y in dataset])
        sq = np.sum((vecs[:, None, :] - vecs[None, :, :]) ** 2, axis=-1)
        values = np.exp(-sq / (2.0 * resolved_sigma ** 2))
    else:
        cache = state_cache if state_cache is not None else {}
        states = []
        for i, y in enumerate(dataset):
            try:
                states.append(_cached_state(q, spec, y, cache))
            except qhmm.ImpossibleSequenceError as exc:
                raise qhmm.ImpossibleSequenceError(
                    f"dataset index {i} ({y!r}): {exc}"
                ) from exc
        values = np.ones((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d = state_distance(spec, states[i], states[j])
                values[i, j] = values[j, i] = (
                    1.0 - d if spec.metric == "fidelity" else np.exp(-d)
                )
    values = 0.5 * (values + values.T)
    min_eig = float(np.linalg.eigvalsh(values)[0])
    repaired = False
    if min_eig < PSD_FLOOR:
        values = _repair_psd(values)
        repaired = True
    return GramMatrix(
        labels=list(dataset),
        values=values,
        min_eigenvalue_raw=min_eig,
        repaired=repaired,
        resolved_sigma=resolved_sigma,
    )


def distance_histogram(q, spec, dataset, bin_edges, state_cache=None):
    """Counts of pairwise kernel-induced distances per bin.

    The distance is -log(kernel) for the exponential families, 1 - F for
    the fidelity family and the Euclidean distance for the RBF baseline.
    """
    edges = np.asarray(bin_edges, dtype=float)
    dists = []
    if spec.family == "rbf":
        vecs = np.array([[float(c) for c in y] for y in dataset])
        sq = np.sum((vecs[:, None, :] - vecs[None, :, :]) ** 2, axis=-1)
        dists = np.sqrt(sq[np.triu_indices(len(dataset), k=1)])
    else:
        cache = state_cache if state_cache is not None else {}
        states = [_cached_state(q, spec, y, cache) for y in dataset]
        for i in range(len(dataset)):
            for j in range(i + 1, len(dataset)):
                dists.append(state_distance(spec, states[i], states[j]))
        dists = np.asarray(dists)
    counts, _ = np.histogram(dists, bins=edges)
    return counts


def gram_to_csv(gm, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(gm.labels)
        for row in gm.values:
            writer.writerow([f"{v:.12g}" for v in row])


def histogram_to_csv(bin_edges, counts, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count"])
        for low, high, c in zip(bin_edges[:-1], bin_edges[1:], counts):
            writer.writerow([f"{low:.12g}", f"{high:.12g}", int(c)])


class SequenceKernel(BaseEstimator, TransformerMixin):
    """Precomputed-kernel transformer over symbol sequences.

    fit() stores the training sequences; transform(X) returns the kernel
    matrix between X and the training set, ready for estimators that accept
    precomputed kernels.
    """

    def __init__(self, model=None, family="predictive", metric="trace",
                 rbf_sigma=None, gamma=1.0):
        self.model = model
        self.family = family
        self.metric = metric
        self.rbf_sigma = rbf_sigma
        self.gamma = gamma

    def _spec(self):
        return KernelSpec(
            family=self.family,
            metric=self.metric,
            rbf_sigma=self.rbf_sigma,
            gamma=self.gamma,
        )

    def fit(self, X, y=None):
        spec = self._spec()
        self.train_sequences_ = list(X)
        self.state_cache_ = {}
        self.resolved_sigma_ = None
        if spec.family == "rbf":
            self.resolved_sigma_ = (
                spec.rbf_sigma if spec.rbf_sigma is not None
                else median_sigma(self.train_sequences_)
            )
        else:
            for y_seq in self.train_sequences_:
                _cached_state(self.model, spec, y_seq, self.state_cache_)
        return self

    def transform(self, X):
        spec = self._spec()
        X = list(X)
        if spec.family == "rbf":
            spec = KernelSpec(family="rbf", rbf_sigma=self.resolved_sigma_)
            return np.array([
                [rbf_kernel(x, t, spec.rbf_sigma) for t in self.train_sequences_]
                for x in X
            ])
        return np.array([
            [kernel_value(self.model, spec, x, t, cache=self.state_cache_)
             for t in self.train_sequences_]
            for x in X
        ])
