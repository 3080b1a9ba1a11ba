"""Command-line harness: model loading, experiments, verification suites.

Every output file starts with comment lines carrying the tool version, a
hash of the resolved configuration and the master seed, so any artifact
can be regenerated byte-for-byte.  Exit codes: 0 success, 1 usage or
configuration error, 2 numerical validation failure.
"""

import argparse
import csv
import hashlib
import json
import sys

import numpy as np

from . import __version__, circuits, hmm, kernels, learn, metrics, qhmm, tasks

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


def load_model(ref):
    """Resolve a built-in name or a JSON model file to a channel-form QHMM."""
    if ref in hmm.BUILTIN_MODELS:
        return qhmm.embed_hmm(hmm.builtin_model(ref))
    try:
        with open(ref) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read model {ref!r}: {exc}")
    if "channels" in doc:
        return qhmm.load(ref)
    if "unitary" in doc:
        return qhmm.kraus_from_unitary(qhmm.load_unitary(ref))
    if "transition" in doc:
        return qhmm.embed_hmm(hmm.load(ref))
    raise UsageError(f"unrecognized model file format: {ref!r}")


def _header_lines(args, seed):
    resolved = {k: v for k, v in sorted(vars(args).items())
                if k not in ("func", "config") and v is not None}
    digest = hashlib.sha256(
        json.dumps(resolved, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]
    return [
        f"qhmm-kernels {__version__}",
        f"config={digest}",
        f"seed={seed}",
    ]


def _write_csv(path, header_lines, rows):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row)


def cmd_sample(args):
    q = load_model(args.model)
    rng = np.random.default_rng(args.seed)
    rows = [["sequence"]]
    rows += [[qhmm.sample(q, args.length, rng)] for _ in range(args.n)]
    _write_csv(args.out, _header_lines(args, args.seed), rows)
    return EXIT_OK


def cmd_distribution(args):
    q = load_model(args.model)
    dist = metrics.forward_distribution(q, q.initial, args.t).probs
    rows = [["sequence", "probability"]]
    rows += [[y, f"{p:.12g}"] for y, p in sorted(dist.items())]
    _write_csv(args.out, _header_lines(args, args.seed), rows)
    return EXIT_OK


def cmd_gram(args):
    q = load_model(args.model)
    spec = kernels.KernelSpec.parse(args.kernel)
    rng = np.random.default_rng(args.seed)
    if args.data:
        ds = tasks.dataset_from_csv(args.data)
        seqs = list(ds.sequences)
    else:
        seqs = [qhmm.sample(q, args.length, rng) for _ in range(args.n)]
    gm = kernels.gram(q, spec, seqs)
    header = _header_lines(args, args.seed) + [
        f"min_eigenvalue_raw={gm.min_eigenvalue_raw:.6g} repaired={gm.repaired}"
    ]
    kernels.gram_to_csv(gm, args.out, header_lines=header)
    return EXIT_OK


def cmd_histogram(args):
    rng = np.random.default_rng(args.seed)
    edges = np.linspace(0.0, args.max_distance, args.bins + 1)
    rows = [["model", "kernel", "bin_low", "bin_high", "count"]]
    tail_mass = {}
    for ref in args.model:
        q = load_model(ref)
        seqs = [qhmm.sample(q, args.length, rng) for _ in range(args.n)]
        for spec_text in args.kernel:
            spec = kernels.KernelSpec.parse(spec_text)
            counts = kernels.distance_histogram(q, spec, seqs, edges)
            for low, high, c in zip(edges[:-1], edges[1:], counts):
                rows.append([ref, spec.name, f"{low:.6g}", f"{high:.6g}", int(c)])
            half = args.bins // 2
            total = counts.sum()
            tail_mass[(ref, spec.name)] = (
                counts[half:].sum() / total if total else 0.0
            )
    header = _header_lines(args, args.seed)
    if args.dim_trend:
        summary = "; ".join(
            f"{ref}/{name}: tail={frac:.3f}" for (ref, name), frac in tail_mass.items()
        )
        header.append(f"upper-half distance mass by model/kernel: {summary}")
    _write_csv(args.out, header, rows)
    return EXIT_OK


def cmd_classify(args):
    q = load_model(args.model)
    labeler = tasks.get_labeler(args.task)
    specs = [kernels.KernelSpec.parse(s) for s in args.kernel]
    protocol = learn.Protocol(
        n=args.n, split=args.split, reps=args.reps, seed=args.seed,
        c_param=args.c, knn_k=args.knn_k,
        classifiers=tuple(args.classifiers.split(",")),
    )
    reports = learn.evaluate(
        q, labeler, specs, protocol, length=args.length, source_model=args.model
    )
    rows = learn.reports_to_rows(reports)
    _write_csv(args.out, _header_lines(args, args.seed), rows)
    return EXIT_OK


def _verify_prop1(rng, rows):
    worst = np.inf
    violations = 0
    for _ in range(50):
        n_dim = int(rng.choice([2, 3, 4]))
        u = qhmm.random_qhmm(n_dim, 2, ("0", "1"), rng)
        q = qhmm.kraus_from_unitary(u)
        for _ in range(4):
            r1 = _random_density(n_dim, rng)
            r2 = _random_density(n_dim, rng)
            k = int(rng.integers(1, 5))
            chk = metrics.check_forward_divergence_bound(q, r1, r2, k)
            worst = min(worst, chk.rhs - chk.lhs)
            violations += not chk.holds
    ok = violations == 0
    rows.append(["prop1", "pass" if ok else "fail", f"worst_margin={worst:.3e}"])
    return ok


def _verify_prop2(rng, rows):
    q = qhmm.embed_hmm(hmm.market_model())
    labeler = tasks.make_predictive_labeler()
    worst = np.inf
    violations = 0
    for _ in range(100):
        y1 = "".join(rng.choice(["0", "1"], size=4))
        y2 = "".join(rng.choice(["0", "1"], size=4))
        chk = metrics.check_predictive_classification_bound(q, labeler, y1, y2, 3)
        worst = min(worst, chk.rhs - chk.lhs)
        violations += not chk.holds
    ok = violations == 0
    rows.append(["prop2", "pass" if ok else "fail", f"worst_margin={worst:.3e}"])
    return ok


def _verify_cptp(rng, rows, model_ref):
    q = load_model(model_ref)
    diag = qhmm.validate(q)
    worst = diag.completeness_deviation
    ok = diag.passed
    for _ in range(20):
        u = qhmm.random_qhmm(int(rng.choice([2, 4])), 2, ("0", "1"), rng)
        d = qhmm.validate(qhmm.kraus_from_unitary(u))
        worst = max(worst, d.completeness_deviation)
        ok = ok and d.passed
    rows.append(["cptp", "pass" if ok else "fail", f"worst_deviation={worst:.3e}"])
    return ok


def _verify_metric(rng, rows):
    worst_slack = np.inf
    for _ in range(1000):
        dim = int(rng.choice([2, 3, 4]))
        a, b, c = (_random_density(dim, rng) for _ in range(3))
        slack = (
            metrics.trace_distance(a, b) + metrics.trace_distance(b, c)
            - metrics.trace_distance(a, c)
        )
        worst_slack = min(worst_slack, slack)
    ok = worst_slack >= -1e-9
    rows.append(["metric", "pass" if ok else "fail",
                 f"worst_triangle_slack={worst_slack:.3e}"])
    return ok


def _verify_psd(rng, rows, model_ref):
    q = load_model(model_ref)
    seqs = [qhmm.sample(q, 8, rng) for _ in range(100)]
    ok = True
    details = []
    for family in ("predictive", "structural"):
        gm = kernels.gram(q, kernels.KernelSpec(family=family, metric="trace"), seqs)
        details.append(f"{family}_min_eig={gm.min_eigenvalue_raw:.3e}")
        ok = ok and gm.min_eigenvalue_raw >= kernels.PSD_FLOOR
    rows.append(["psd", "pass" if ok else "fail", " ".join(details)])
    return ok


def _random_density(dim, rng):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return m / np.trace(m).real


def cmd_verify(args):
    rng = np.random.default_rng(args.seed)
    rows = [["suite", "result", "details"]]
    suites = args.suite.split(",")
    all_ok = True
    for suite in suites:
        if suite == "prop1":
            all_ok &= _verify_prop1(rng, rows)
        elif suite == "prop2":
            all_ok &= _verify_prop2(rng, rows)
        elif suite == "cptp":
            all_ok &= _verify_cptp(rng, rows, args.model)
        elif suite == "metric":
            all_ok &= _verify_metric(rng, rows)
        elif suite == "psd":
            all_ok &= _verify_psd(rng, rows, args.model)
        else:
            raise UsageError(f"unknown verification suite {suite!r}")
    _write_csv(args.out, _header_lines(args, args.seed), rows)
    for row in rows[1:]:
        print(f"{row[0]}: {row[1]} ({row[2]})")
    return EXIT_OK if all_ok else EXIT_NUMERICAL


def cmd_circuits(args):
    rng = np.random.default_rng(args.seed)
    if args.sub == "swap":
        dim = args.dim
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi = psi / np.linalg.norm(psi)
        if args.identical:
            phi = psi
        else:
            phi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            phi = phi / np.linalg.norm(phi)
        estimate = circuits.swap_test(psi, phi, args.shots, rng)
        exact = float(np.abs(np.vdot(phi, psi)) ** 2)
        rows = [["estimate", "exact", "shots"],
                [f"{estimate:.6g}", f"{exact:.6g}", args.shots]]
        _write_csv(args.out, _header_lines(args, args.seed), rows)
        return EXIT_OK
    if args.sub == "tomo":
        rho = _random_density(2, rng) if args.state == "random" else \
            qhmm.pure_density(np.array([1.0, 1.0]) / np.sqrt(2))
        bloch = circuits.pauli_expectations(rho, args.shots, rng)
        recon = circuits.reconstruct_density(bloch)
        err = float(np.linalg.norm(recon - rho))
        rows = [["rx", "ry", "rz", "frobenius_error"],
                [f"{bloch.rx:.6g}", f"{bloch.ry:.6g}", f"{bloch.rz:.6g}",
                 f"{err:.6g}"]]
        _write_csv(args.out, _header_lines(args, args.seed), rows)
        return EXIT_OK
    if args.sub == "projgram":
        q = load_model(args.model)
        n_sym = len(q.alphabet)
        seqs = args.sequences.split(",") if args.sequences else [
            "".join(p) for p in _all_sequences(q.alphabet, args.length)
        ]
        gm, skipped = circuits.projected_kernel_matrix(
            q, seqs, gamma=args.gamma,
            shots_per_basis=args.shots if args.shots > 0 else None, rng=rng,
        )
        header = _header_lines(args, args.seed)
        if skipped:
            header.append(f"skipped={','.join(skipped)}")
        kernels.gram_to_csv(gm, args.out, header_lines=header)
        return EXIT_OK
    raise UsageError(f"unknown circuits subcommand {args.sub!r}")


def _all_sequences(alphabet, length):
    import itertools

    return itertools.product(alphabet, repeat=length)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qhmm-kernels",
        description="Quantum generative kernels for symbolic time series",
    )
    parser.add_argument("--config", help="JSON file with default argument values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw sequences from a model")
    p.add_argument("--model", default="market4")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--length", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("distribution", help="exact sequence distribution")
    p.add_argument("--model", default="market4")
    p.add_argument("--t", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distribution)

    p = sub.add_parser("gram", help="kernel Gram matrix over a dataset")
    p.add_argument("--model", default="market4")
    p.add_argument("--kernel", default="predictive:trace")
    p.add_argument("--data", help="dataset CSV; sampled fresh when omitted")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--length", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("histogram", help="pairwise distance histograms")
    p.add_argument("--model", action="append", required=True)
    p.add_argument("--kernel", action="append", required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--length", type=int, default=8)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--max-distance", type=float, default=2.0)
    p.add_argument("--dim-trend", action="store_true",
                   help="append a tail-mass comparison line to the header")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("classify", help="benchmark classifiers on a task")
    p.add_argument("--model", default="market4")
    p.add_argument("--task", choices=("structural", "predictive"),
                   default="predictive")
    p.add_argument("--kernel", action="append", required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--length", type=int, default=8)
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--classifiers", default="svc,knn")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", help="run numerical property suites")
    p.add_argument("--suite", default="prop1,prop2,cptp,metric,psd")
    p.add_argument("--model", default="market4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("circuits", help="measurement-protocol simulations")
    p.add_argument("sub", choices=("swap", "tomo", "projgram"))
    p.add_argument("--model", default="market4")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--identical", action="store_true")
    p.add_argument("--state", default="random")
    p.add_argument("--sequences", help="comma-separated; all of --length if omitted")
    p.add_argument("--length", type=int, default=4)
    p.add_argument("--shots", type=int, default=0,
                   help="0 = exact mode for projgram")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_circuits)
    return parser


def _apply_config(parser, argv):
    """Load --config defaults before parsing the remaining flags."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        try:
            with open(known.config) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {known.config!r}: {exc}")
        for action in parser._subparsers._group_actions[0].choices.values():
            action.set_defaults(**{
                k.replace("-", "_"): v for k, v in defaults.items()
            })
    return parser.parse_args(argv)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
