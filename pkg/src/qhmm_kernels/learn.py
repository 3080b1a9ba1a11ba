"""Kernel classifiers and the benchmark evaluation harness.

The SVM is trained by sequential minimal optimization (SMO) on a
precomputed Gram matrix, following Platt's two-index working-set scheme
with the max-|E1 - E2| second-choice heuristic.  The k-NN classifier votes
over kernel-induced distances.  evaluate() runs the sample/split/train/
score protocol repeatedly and reports percentile confidence intervals.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import kernels, tasks

KKT_TOL = 1e-3
_STEP_EPS = 1e-12


class DegenerateDataError(ValueError):
    """Training data with a single class (or empty)."""


@dataclass
class SvmModel:
    dual_coefficients: np.ndarray  # alpha_i * y_i, full training length
    bias: float
    support_indices: np.ndarray
    c_param: float
    train_refs: np.ndarray
    objective: float
    kkt_violation: float


def _dual_objective(alpha, y, gram_values):
    q = alpha * y
    return float(alpha.sum() - 0.5 * q @ gram_values @ q)


def _smo_solve(gram_values, y, c_param, tol=KKT_TOL, max_sweeps=2000):
    """Maximize the dual on the box [0, C]^n with the equality constraint.

    Returns (alpha, bias, objective, worst KKT violation).  The dual
    objective is asserted non-decreasing after every sweep; each two-index
    step solves its subproblem exactly, so a decrease indicates a bug.
    """
    n = len(y)
    alpha = np.zeros(n)
    errors = -y.astype(float)  # decision - y at alpha = 0, b = 0
    bias = 0.0

    def take_step(i1, i2):
        nonlocal bias, errors
        if i1 == i2:
            return False
        a1, a2 = alpha[i1], alpha[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = errors[i1], errors[i2]
        s = y1 * y2
        if s > 0:
            low, high = max(0.0, a1 + a2 - c_param), min(c_param, a1 + a2)
        else:
            low, high = max(0.0, a2 - a1), min(c_param, c_param + a2 - a1)
        if high - low < _STEP_EPS:
            return False
        k11 = gram_values[i1, i1]
        k12 = gram_values[i1, i2]
        k22 = gram_values[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > _STEP_EPS:
            a2_new = np.clip(a2 + y2 * (e1 - e2) / eta, low, high)
        else:
            # flat direction: the dual change along the feasible segment is
            # dW(u) = u (e1 - e2) - eta u^2 / 2 with u = y2 (a2_new - a2);
            # pick the better box end, if it improves the dual at all
            u_l = y2 * (low - a2)
            u_h = y2 * (high - a2)
            dw_l = u_l * (e1 - e2) - 0.5 * eta * u_l * u_l
            dw_h = u_h * (e1 - e2) - 0.5 * eta * u_h * u_h
            if max(dw_l, dw_h) <= _STEP_EPS:
                return False
            a2_new = low if dw_l > dw_h else high
        snap = 1e-8 * c_param
        if a2_new < snap:
            a2_new = 0.0
        elif a2_new > c_param - snap:
            a2_new = c_param
        if abs(a2_new - a2) < _STEP_EPS * (a2_new + a2 + _STEP_EPS):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = bias - e1 - d1 * k11 - d2 * k12
        b2 = bias - e2 - d1 * k12 - d2 * k22
        if 0.0 < a1_new < c_param:
            new_bias = b1
        elif 0.0 < a2_new < c_param:
            new_bias = b2
        else:
            new_bias = 0.5 * (b1 + b2)
        errors += d1 * gram_values[:, i1] + d2 * gram_values[:, i2] \
            + (new_bias - bias)
        bias = new_bias
        alpha[i1] = a1_new
        alpha[i2] = a2_new
        return True

    bound_eps = 1e-8 * c_param

    def examine(i2):
        r2 = errors[i2] * y[i2]
        violating = (r2 < -tol and alpha[i2] < c_param - bound_eps) \
            or (r2 > tol and alpha[i2] > bound_eps)
        if not violating:
            return False
        non_bound = np.flatnonzero((alpha > 0) & (alpha < c_param))
        if non_bound.size > 1:
            i1 = int(non_bound[np.argmax(np.abs(errors[non_bound] - errors[i2]))])
            if take_step(i1, i2):
                return True
        for i1 in non_bound:
            if take_step(int(i1), i2):
                return True
        for i1 in range(n):
            if take_step(i1, i2):
                return True
        return False

    examine_all = True
    prev_obj = -np.inf
    for _ in range(max_sweeps):
        changed = 0
        if examine_all:
            candidates = range(n)
        else:
            candidates = np.flatnonzero((alpha > 0) & (alpha < c_param))
        for i2 in candidates:
            changed += examine(int(i2))
        obj = _dual_objective(alpha, y, gram_values)
        assert obj >= prev_obj - 1e-8 * (1.0 + abs(prev_obj)), \
            "dual objective decreased across a sweep"
        prev_obj = obj
        if examine_all:
            if changed == 0:
                break
            examine_all = False
        elif changed == 0:
            examine_all = True

    r = errors * y
    violation = max(
        float(np.max(np.where(alpha < c_param - bound_eps, -r, 0.0), initial=0.0)),
        float(np.max(np.where(alpha > bound_eps, r, 0.0), initial=0.0)),
    )
    return alpha, bias, prev_obj, violation


def _as_values(gram):
    values = gram.values if isinstance(gram, kernels.GramMatrix) else np.asarray(gram)
    if not np.all(np.isfinite(values)):
        raise ValueError("Gram matrix contains non-finite entries")
    return values


def svm_train(gram, classes, c_param=1.0, tol=KKT_TOL):
    """Train on a (PSD-repaired) Gram matrix with 0/1 classes."""
    values = _as_values(gram)
    classes = np.asarray(classes, dtype=int)
    if len(set(classes.tolist())) < 2:
        raise DegenerateDataError("training set contains a single class")
    y = np.where(classes == 1, 1.0, -1.0)
    alpha, bias, objective, violation = _smo_solve(values, y, c_param, tol)
    support = np.flatnonzero(alpha > 1e-12)
    return SvmModel(
        dual_coefficients=alpha * y,
        bias=bias,
        support_indices=support,
        c_param=c_param,
        train_refs=np.arange(len(y)),
        objective=objective,
        kkt_violation=violation,
    )


def svm_decision(model, kernel_row):
    row = np.asarray(kernel_row, dtype=float)
    if row.shape[0] != model.dual_coefficients.shape[0]:
        raise ValueError("kernel row length does not match training set")
    return float(model.dual_coefficients @ row + model.bias)


def svm_predict(model, kernel_row):
    return 1 if svm_decision(model, kernel_row) > 0 else 0


def knn_classify(distances_to_train, train_classes, k):
    """Majority vote among the k nearest training points.

    Distance ties break by training index order; vote ties toward class 0.
    """
    distances = np.asarray(distances_to_train, dtype=float)
    train_classes = np.asarray(train_classes, dtype=int)
    if distances.size == 0:
        raise DegenerateDataError("empty training set")
    if not 1 <= k <= distances.size:
        raise ValueError("k out of range")
    order = np.argsort(distances, kind="stable")
    votes = train_classes[order[:k]]
    return 1 if votes.sum() > k / 2 else 0


def induced_distance(kernel_row, self_kernel=1.0):
    """d = sqrt(k(x,x) + k(t,t) - 2 k(x,t)) with unit diagonal kernels."""
    return np.sqrt(np.clip(2.0 * self_kernel - 2.0 * np.asarray(kernel_row), 0.0, None))


class KernelSvmClassifier(BaseEstimator, ClassifierMixin):
    """SVC on a precomputed kernel matrix (rows: samples, cols: train)."""

    def __init__(self, c_param=1.0, tol=KKT_TOL):
        self.c_param = c_param
        self.tol = tol

    def fit(self, K, y):
        self.model_ = svm_train(K, y, c_param=self.c_param, tol=self.tol)
        return self

    def decision_function(self, K):
        return np.asarray(K) @ self.model_.dual_coefficients + self.model_.bias

    def predict(self, K):
        return (self.decision_function(K) > 0).astype(int)


class KernelKnnClassifier(BaseEstimator, ClassifierMixin):
    """k-NN over kernel-induced distances from a precomputed kernel matrix."""

    def __init__(self, n_neighbors=5):
        self.n_neighbors = n_neighbors

    def fit(self, K, y):
        self.train_classes_ = np.asarray(y, dtype=int)
        return self

    def predict(self, K):
        K = np.asarray(K)
        return np.array([
            knn_classify(induced_distance(row), self.train_classes_, self.n_neighbors)
            for row in K
        ])


@dataclass(frozen=True)
class Protocol:
    n: int = 500
    split: float = 0.5
    reps: int = 100
    seed: int = 0
    c_param: object = 1.0  # float, or mapping kernel-name -> float
    knn_k: int = 5
    classifiers: tuple = ("svc", "knn")
    max_resamples: int = 50

    def c_for(self, kernel_name):
        if isinstance(self.c_param, dict):
            return float(self.c_param.get(kernel_name, self.c_param.get("default", 1.0)))
        return float(self.c_param)


@dataclass
class EvalReport:
    classifier: str
    kernel: str
    in_sample: float
    in_ci: tuple
    out_sample: float
    out_ci: tuple
    repetitions: int
    seed: int
    resample_count: int
    rep_in: list = field(default_factory=list)
    rep_out: list = field(default_factory=list)


def _percentile_ci(values):
    values = np.asarray(values, dtype=float)
    if values.size == 1:
        v = float(values[0])
        return (v, v)
    return (float(np.percentile(values, 2.5)), float(np.percentile(values, 97.5)))


def _quantum_gram_full(model, spec, seqs, state_cache, pair_cache):
    uniq = sorted(set(seqs))
    states = [kernels._cached_state(model, spec, y, state_cache) for y in uniq]
    m = len(uniq)
    ku = np.ones((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            key = (uniq[i], uniq[j])
            v = pair_cache.get(key)
            if v is None:
                d = kernels.state_distance(spec, states[i], states[j])
                v = 1.0 - d if spec.metric == "fidelity" else float(np.exp(-d))
                pair_cache[key] = v
            ku[i, j] = ku[j, i] = v
    index = {y: i for i, y in enumerate(uniq)}
    idx = np.array([index[y] for y in seqs])
    return ku[np.ix_(idx, idx)]


def _rbf_gram_full(seqs, train_idx, sigma):
    vecs = np.array([[float(c) for c in y] for y in seqs])
    sq = np.sum((vecs[:, None, :] - vecs[None, :, :]) ** 2, axis=-1)
    if sigma is None:
        tri = sq[np.ix_(train_idx, train_idx)][
            np.triu_indices(len(train_idx), k=1)
        ]
        d = np.sqrt(tri[tri > 0])
        sigma = float(np.median(d)) if d.size else 1.0
    return np.exp(-sq / (2.0 * sigma ** 2))


def _maybe_repair(values):
    if float(np.linalg.eigvalsh(values)[0]) < kernels.PSD_FLOOR:
        return kernels._repair_psd(values)
    return values


def evaluate(model, labeler, kernel_specs, protocol, length=8, source_model=""):
    """Run the sample/split/train/score protocol for each kernel spec.

    Repetitions are paired: every spec and classifier sees the same
    per-repetition dataset and split, so per-repetition accuracies can be
    compared head to head.
    """
    specs = list(kernel_specs)
    seeds = np.random.SeedSequence(protocol.seed).spawn(protocol.reps)
    state_caches = {s.name: {} for s in specs}
    pair_caches = {s.name: {} for s in specs}
    rep_scores = {
        (clf, s.name): {"in": [], "out": []}
        for s in specs
        for clf in protocol.classifiers
    }
    resample_count = 0
    n_train = int(round(protocol.n * protocol.split))
    for rep_seed in seeds:
        rng = np.random.default_rng(rep_seed)
        for _ in range(protocol.max_resamples):
            ds = tasks.generate_dataset(
                model, protocol.n, length, labeler, rng, source_model=source_model
            )
            perm = rng.permutation(protocol.n)
            tr, te = perm[:n_train], perm[n_train:]
            classes = np.asarray(ds.classes)
            if len(set(classes[tr].tolist())) == 2 and te.size:
                break
            resample_count += 1
        else:
            raise DegenerateDataError("could not sample a two-class training set")
        seqs = list(ds.sequences)
        for spec in specs:
            if spec.family == "rbf":
                full = _rbf_gram_full(seqs, tr, spec.rbf_sigma)
            else:
                full = _quantum_gram_full(
                    model, spec, seqs,
                    state_caches[spec.name], pair_caches[spec.name],
                )
            k_train = _maybe_repair(full[np.ix_(tr, tr)])
            k_test = full[np.ix_(te, tr)]
            for clf_name in protocol.classifiers:
                if clf_name == "svc":
                    clf = KernelSvmClassifier(c_param=protocol.c_for(spec.name))
                elif clf_name == "knn":
                    clf = KernelKnnClassifier(n_neighbors=protocol.knn_k)
                else:
                    raise ValueError(f"unknown classifier {clf_name!r}")
                clf.fit(k_train, classes[tr])
                in_acc = float(np.mean(clf.predict(k_train) == classes[tr]))
                out_acc = float(np.mean(clf.predict(k_test) == classes[te]))
                rep_scores[(clf_name, spec.name)]["in"].append(in_acc)
                rep_scores[(clf_name, spec.name)]["out"].append(out_acc)
    reports = []
    for spec in specs:
        for clf_name in protocol.classifiers:
            scores = rep_scores[(clf_name, spec.name)]
            reports.append(EvalReport(
                classifier=clf_name,
                kernel=spec.name,
                in_sample=float(np.mean(scores["in"])),
                in_ci=_percentile_ci(scores["in"]),
                out_sample=float(np.mean(scores["out"])),
                out_ci=_percentile_ci(scores["out"]),
                repetitions=protocol.reps,
                seed=protocol.seed,
                resample_count=resample_count,
                rep_in=scores["in"],
                rep_out=scores["out"],
            ))
    return reports


def paired_win_fraction(rep_a, rep_b):
    """Fraction of paired repetitions where a strictly beats b."""
    a = np.asarray(rep_a, dtype=float)
    b = np.asarray(rep_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("unpaired repetition lists")
    return float(np.mean(a > b))


def reports_to_rows(reports, include_rfs_row=True):
    """Rows in the benchmark table layout, with an explicit not-implemented
    placeholder for the external random-forest baseline."""
    rows = [["Classifier", "Kernel", "In Sample", "CI", "Out Sample", "CI"]]
    if include_rfs_row:
        rows.append(["RFS", "N/A", "not implemented", "", "not implemented", ""])
    name_map = {"svc": "SVC", "knn": "k-NN"}
    for r in reports:
        rows.append([
            name_map.get(r.classifier, r.classifier),
            r.kernel,
            f"{r.in_sample:.3f}",
            f"{r.in_ci[0]:.3f} - {r.in_ci[1]:.3f}",
            f"{r.out_sample:.3f}",
            f"{r.out_ci[0]:.3f} - {r.out_ci[1]:.3f}",
        ])
    return rows
