"""Command-line surface.

Every subcommand prints a single self-contained JSON report on standard
output: the echoed command and configuration, the seed, subcommand-specific
outputs, instrumentation counters (kernel evaluations and a flop estimate),
and wall time in nanoseconds. Exit codes: 0 on success, 2 on usage errors
(argparse), 1 on runtime errors (message on standard error).

The environment variable ``LRT_THREADS`` caps the worker count; the default
(and only value currently exercised) is 1, which keeps every run
bit-reproducible from ``--seed``.
"""

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import kernels as K
from . import metrics
from .attention import AttentionProblem, attention_max_err, exact_attention, \
    thinformer
from .ctt import CTTConfig, ctt_test, subsample_mmd_test
from .data import Coreset, ThinConfig, induced_prob_vectors
from .io import load_points, save_points
from .reorder import SGDProblem, run_sgd
from .rng import RandomStream
from .thinning import thin, compress_output_size

_ALGO_NAMES = {
    "uniform": "uniform", "kh": "kh", "lkh": "lkh", "rkh": "rkh",
    "khc": "kh_compress", "ktc": "kt_compress", "gs": "gs_thin",
    "gsc": "gs_compress",
}


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _emit(command, args, outputs, t0):
    report = {
        "command": command,
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "seed": getattr(args, "seed", None),
        "outputs": outputs,
        "counters": K.get_counters(),
        "wall_ns": time.perf_counter_ns() - t0,
        "threads": int(os.environ.get("LRT_THREADS", "1")),
    }
    json.dump(report, sys.stdout, default=_json_default)
    sys.stdout.write("\n")


def _build_kernel(args, points=None):
    kind, params = K.parse_kernel_spec(getattr(args, "kernel", "gaussian:eta=1"))
    tab = None
    if kind == "tabulated":
        if not getattr(args, "kernel_matrix", None):
            raise ValueError("tabulated kernel needs --kernel-matrix FILE")
        tab = load_points(args.kernel_matrix)
    return K.make_kernel(kind, params, tab_matrix=tab, points=points)


def _valid_size(n, algo, n_out=None):
    """Largest prefix length of n that the algorithm accepts."""
    if algo == "uniform":
        return n
    if algo in ("kh", "lkh"):
        return n - (n % 2)
    if algo in ("rkh", "gs_thin"):
        if not n_out:
            raise ValueError("n_out required")
        m = n // n_out
        if m < 2:
            raise ValueError("n_out too large to truncate for halving")
        return n_out * 2 ** (m.bit_length() - 1)
    # compress family: largest power of 4
    return 4 ** int(math.log(n, 4) + 1e-9)


def _cmd_thin(args):
    t0 = time.perf_counter_ns()
    X = load_points(args.input, args.format)
    algo = _ALGO_NAMES[args.algo]
    n = X.shape[0]
    if args.pad == "truncate":
        keep = _valid_size(n, algo, args.nout)
        if keep < n:
            print(f"warning: truncating input from {n} to {keep} rows",
                  file=sys.stderr)
            X = X[:keep]
    cfg = ThinConfig(algorithm=algo, delta=args.delta, n_out=args.nout,
                     g=args.g, seed=args.seed, gs_impl=args.impl)
    kernel = None
    if algo not in ("uniform", "lkh"):
        kernel = _build_kernel(args, points=X)
    K.reset_counters()
    coreset = thin(X, cfg, kernel=kernel, stream=RandomStream(args.seed))
    _emit("thin", args, {
        "indices": coreset.indices, "n_out": coreset.n_out,
        "n_in": X.shape[0],
    }, t0)
    return 0


def _load_coreset(arg, n):
    if arg.startswith("@"):
        with open(arg[1:]) as fh:
            idx = json.load(fh)
            if isinstance(idx, dict):
                idx = idx["outputs"]["indices"]
    else:
        idx = [int(t) for t in arg.split(",") if t.strip()]
    return Coreset(np.asarray(idx, dtype=np.int64), n)


def _cmd_mmd(args):
    t0 = time.perf_counter_ns()
    X = load_points(args.input, args.format)
    kernel = _build_kernel(args, points=X)
    coreset = _load_coreset(args.indices, X.shape[0])
    K.reset_counters()
    Kmat = K.kernel_matrix(kernel, X)
    p, q = induced_prob_vectors(X, coreset)
    _emit("mmd", args, {"mmd": metrics.mmd(Kmat, p, q)}, t0)
    return 0


def _cmd_kms(args):
    t0 = time.perf_counter_ns()
    X = load_points(args.input, args.format)
    kernel = _build_kernel(args, points=X)
    coreset = _load_coreset(args.indices, X.shape[0])
    queries = (np.arange(X.shape[0]) if args.queries is None else
               np.asarray([int(t) for t in args.queries.split(",")]))
    K.reset_counters()
    Kmat = K.kernel_matrix(kernel, X)
    p, q = induced_prob_vectors(X, coreset)
    _emit("kms", args, {"kms": metrics.kms(Kmat, p, q, queries)}, t0)
    return 0


def _cmd_spectrum(args):
    t0 = time.perf_counter_ns()
    X = load_points(args.input, args.format)
    kernel = _build_kernel(args, points=X)
    K.reset_counters()
    vals = metrics.spectrum(K.kernel_matrix(kernel, X))
    if args.top:
        vals = vals[:args.top]
    _emit("spectrum", args, {"eigenvalues": vals}, t0)
    return 0


def _cmd_epsrank(args):
    t0 = time.perf_counter_ns()
    M = load_points(args.input, args.format)
    K.reset_counters()
    _emit("epsrank", args, {"eps": args.eps,
                            "rank": metrics.eps_rank(M, args.eps)}, t0)
    return 0


def _cmd_attn(args):
    t0 = time.perf_counter_ns()
    q = load_points(args.queries, args.format)
    k = load_points(args.keys, args.format)
    v = load_points(args.values, args.format)
    problem = AttentionProblem(q, k, v)
    K.reset_counters()
    result = thinformer(problem, args.g, RandomStream(args.seed),
                        compute_exact=args.exact)
    outputs = {
        "selected": result.selected.indices,
        "n_out": result.selected.n_out,
        "max_err": result.max_err,
    }
    if args.out:
        save_points(args.out, result.t_hat)
        outputs["t_hat_file"] = args.out
    else:
        outputs["t_hat"] = result.t_hat
    _emit("attn", args, outputs, t0)
    return 0


def _cmd_reorder_sim(args):
    t0 = time.perf_counter_ns()
    rng = np.random.default_rng(args.seed)
    if args.data:
        A = load_points(args.data, args.format)
        b = load_points(args.targets, args.format).ravel()
    else:
        A = rng.standard_normal((args.n, args.d))
        if args.loss == "ls":
            w_star = rng.standard_normal(args.d)
            b = A @ w_star + 0.1 * rng.standard_normal(args.n)
        else:
            w_star = rng.standard_normal(args.d)
            b = np.where(A @ w_star + 0.5 * rng.standard_normal(args.n) > 0,
                         1.0, -1.0)
    problem = SGDProblem(
        loss_kind="least_squares" if args.loss == "ls" else "logistic",
        features=A, targets=b, step_size=args.alpha, epochs=args.epochs,
        l2=args.l2, batch_size=args.batch_size)
    ordering = "random_reshuffle" if args.ordering == "rr" else "lkh_reorder"
    K.reset_counters()
    result = run_sgd(problem, ordering, args.seed)
    _emit("reorder-sim", args, {
        "losses": result.losses,
        "eps_ranks": result.eps_ranks,
        "eps_values": result.eps_values,
        "diverged": result.diverged,
    }, t0)
    return 0


def _cmd_ctt(args):
    t0 = time.perf_counter_ns()
    X = load_points(args.x, args.format)
    Y = load_points(args.y, args.format)
    if args.embed_x or args.embed_y:
        if not (args.embed_x and args.embed_y):
            raise ValueError("both --embed-x and --embed-y are required")
        EX = load_points(args.embed_x, args.format)
        EY = load_points(args.embed_y, args.format)
        if EX.shape[0] != X.shape[0] or EY.shape[0] != Y.shape[0]:
            raise ValueError("embeddings must align with the point files")
        X = np.hstack([X, EX])
        Y = np.hstack([Y, EY])
    kernel = _build_kernel(args, points=np.vstack([X, Y]))
    cfg = CTTConfig(s=args.s, g=args.g, delta=args.delta, b=args.B,
                    alpha=args.alpha, seed=args.seed, shuffle=args.shuffle)
    K.reset_counters()
    outcome = ctt_test(X, Y, kernel, cfg)
    _emit("ctt", args, {
        "statistic": outcome.statistic,
        "permuted": outcome.permuted,
        "rank": outcome.rank,
        "reject_prob": outcome.reject_prob,
        "rejected": outcome.rejected,
        "runtime_ns": outcome.runtime_ns,
        "details": outcome.details,
    }, t0)
    return 0


def _cmd_bench(args):
    t0 = time.perf_counter_ns()
    rng = np.random.default_rng(args.seed)
    rows = []
    if args.suite == "khc":
        X = rng.random((args.n, 2))
        kernel = K.GaussianKernel(1.0)
        from .thinning import kh_compress
        for g in range(args.gmax + 1):
            K.reset_counters()
            w0 = time.perf_counter_ns()
            kh_compress(X, kernel, 0.5, g, RandomStream(args.seed))
            rows.append({"g": g, "n_out": compress_output_size(args.n, g),
                         **K.get_counters(),
                         "wall_ns": time.perf_counter_ns() - w0})
    elif args.suite == "gsc":
        X = rng.random((args.n, 2))
        kernel = K.GaussianKernel(1.0)
        from .thinning import gs_compress
        for g in range(args.gmax + 1):
            K.reset_counters()
            w0 = time.perf_counter_ns()
            gs_compress(X, kernel, g, RandomStream(args.seed))
            rows.append({"g": g, "n_out": compress_output_size(args.n, g),
                         **K.get_counters(),
                         "wall_ns": time.perf_counter_ns() - w0})
    elif args.suite == "ctt":
        X = rng.standard_normal((args.n, 2))
        Y = rng.standard_normal((args.n, 2))
        kernel = K.GaussianKernel(1.0)
        for g in range(args.gmax + 1):
            K.reset_counters()
            cfg = CTTConfig(s=args.s, g=g, delta=0.5, b=args.B,
                            alpha=0.05, seed=args.seed)
            outcome = ctt_test(X, Y, kernel, cfg)
            rows.append({"g": g, **K.get_counters(),
                         "wall_ns": outcome.runtime_ns})
    else:
        raise ValueError(f"unknown bench suite {args.suite!r}")
    _emit("bench", args, {"grid": rows}, t0)
    return 0


def _validate_prop21(args):
    from .thinning import thin_uniform
    rng = np.random.default_rng(args.seed)
    X = rng.random((256, 2))
    kernel = K.GaussianKernel(1.0)
    Kmat = K.kernel_matrix(kernel, X)
    expected = metrics.uniform_mmd2_expectation(Kmat, 256, 64)
    root = RandomStream(args.seed)
    p = np.full(256, 1.0 / 256)
    row_mean = Kmat.mean(axis=1)
    base = float(p @ row_mean)
    total = 0.0
    for t in range(args.draws):
        idx = thin_uniform(X, 64, root.child(t)).indices
        sub = Kmat[np.ix_(idx, idx)].mean()
        total += base - 2.0 * row_mean[idx].mean() + sub
    observed = total / args.draws
    rel = abs(observed - expected) / expected
    return {"expected": expected, "observed": observed,
            "relative_error": rel, "passed": bool(rel <= 0.02)}


def _validate_wnorm(args):
    from .thinning import kh_halve, lkh_halve, thin_uniform, gs_halve
    rng = np.random.default_rng(args.seed)
    X = rng.standard_normal((64, 3))
    kernel = K.GaussianKernel(0.5)
    root = RandomStream(args.seed)
    worst = 0.0
    for i, coreset in enumerate([
            thin_uniform(X, 16, root.child(0)),
            kh_halve(X, kernel, 0.5, root.child(1)),
            lkh_halve(X, 0.5, root.child(2)),
            gs_halve(X, kernel, root.child(3))]):
        p, q = induced_prob_vectors(X, coreset)
        target = 1.0 / coreset.n_out - 1.0 / 64
        worst = max(worst, abs(float(((p - q) ** 2).sum()) - target))
    return {"max_abs_error": worst, "passed": bool(worst <= 1e-12)}


def _validate_gsagree(args):
    from .thinning import gs_halve
    rng = np.random.default_rng(args.seed)
    failures = 0
    for t in range(20):
        n = int(rng.integers(2, 17)) * 2
        X = rng.standard_normal((n, 3))
        kernel = K.GaussianKernel(1.0)
        a = gs_halve(X, kernel, RandomStream(args.seed, t), impl="quartic")
        b = gs_halve(X, kernel, RandomStream(args.seed, t), impl="cubic")
        failures += int(not np.array_equal(a.indices, b.indices))
    return {"instances": 20, "failures": failures,
            "passed": bool(failures == 0)}


def _validate_refine(args):
    from .thinning import kh_halve, kh_refine
    rng = np.random.default_rng(args.seed)
    violations = 0
    for t in range(20):
        X = rng.standard_normal((32, 2))
        kernel = K.GaussianKernel(1.0)
        Kmat = K.kernel_matrix(kernel, X)
        before = kh_halve(X, kernel, 0.5, RandomStream(args.seed, t))
        after = kh_refine(X, kernel, 0.5, RandomStream(args.seed, t))
        p, qb = induced_prob_vectors(X, before)
        _, qa = induced_prob_vectors(X, after)
        if metrics.mmd(Kmat, p, qa) > metrics.mmd(Kmat, p, qb) + 1e-12:
            violations += 1
    return {"instances": 20, "violations": violations,
            "passed": bool(violations == 0)}


_VALIDATORS = {
    "prop21": _validate_prop21,
    "wnorm": _validate_wnorm,
    "gsagree": _validate_gsagree,
    "refine": _validate_refine,
}


def _cmd_validate(args):
    t0 = time.perf_counter_ns()
    K.reset_counters()
    result = _VALIDATORS[args.check](args)
    _emit("validate", args, result, t0)
    return 0 if result["passed"] else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lrt",
        description="Distribution compression toolkit: thinning, quality "
                    "metrics, attention/reordering harnesses, and "
                    "compressed two-sample testing.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=["csv", "f64le"], default=None,
                       help="input file format (inferred from suffix)")

    p = sub.add_parser("thin", help="thin a point file to a coreset")
    p.add_argument("--input", required=True)
    p.add_argument("--algo", choices=sorted(_ALGO_NAMES), required=True)
    p.add_argument("--kernel", default="gaussian:eta=1")
    p.add_argument("--kernel-matrix", default=None)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--nout", type=int, default=None)
    p.add_argument("--g", type=int, default=None)
    p.add_argument("--impl", choices=["quartic", "cubic"], default="cubic")
    p.add_argument("--pad", choices=["none", "truncate"], default="none")
    add_common(p)
    p.set_defaults(func=_cmd_thin)

    p = sub.add_parser("mmd", help="MMD between input and coreset measures")
    p.add_argument("--input", required=True)
    p.add_argument("--indices", required=True,
                   help="comma list or @file (JSON list or thin report)")
    p.add_argument("--kernel", default="gaussian:eta=1")
    p.add_argument("--kernel-matrix", default=None)
    add_common(p)
    p.set_defaults(func=_cmd_mmd)

    p = sub.add_parser("kms", help="kernel max seminorm over query rows")
    p.add_argument("--input", required=True)
    p.add_argument("--indices", required=True)
    p.add_argument("--queries", default=None, help="comma list (default all)")
    p.add_argument("--kernel", default="gaussian:eta=1")
    p.add_argument("--kernel-matrix", default=None)
    add_common(p)
    p.set_defaults(func=_cmd_kms)

    p = sub.add_parser("spectrum", help="kernel matrix eigenvalues")
    p.add_argument("--input", required=True)
    p.add_argument("--kernel", default="gaussian:eta=1")
    p.add_argument("--kernel-matrix", default=None)
    p.add_argument("--top", type=int, default=None)
    add_common(p)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("epsrank", help="singular values above a threshold")
    p.add_argument("--input", required=True)
    p.add_argument("--eps", type=float, required=True)
    add_common(p)
    p.set_defaults(func=_cmd_epsrank)

    p = sub.add_parser("attn", help="thinned softmax attention")
    p.add_argument("--queries", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--exact", action="store_true",
                   help="also compute the exact output and max error")
    p.add_argument("--out", default=None, help="write T-hat here (f64le/csv)")
    add_common(p)
    p.set_defaults(func=_cmd_attn)

    p = sub.add_parser("reorder-sim", help="SGD reordering simulation")
    p.add_argument("--loss", choices=["ls", "logistic"], default="ls")
    p.add_argument("--ordering", choices=["rr", "lkh"], required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--data", default=None, help="feature file (else synthetic)")
    p.add_argument("--targets", default=None)
    add_common(p)
    p.set_defaults(func=_cmd_reorder_sim)

    p = sub.add_parser("ctt", help="compressed two-sample test")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--B", type=int, default=39)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--kernel", default="gaussian:eta=1")
    p.add_argument("--kernel-matrix", default=None)
    p.add_argument("--embed-x", default=None)
    p.add_argument("--embed-y", default=None)
    p.add_argument("--shuffle", action="store_true")
    add_common(p)
    p.set_defaults(func=_cmd_ctt)

    p = sub.add_parser("bench", help="instrumented scaling grids")
    p.add_argument("--suite", choices=["khc", "gsc", "ctt"], required=True)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--gmax", type=int, default=3)
    p.add_argument("--s", type=int, default=8)
    p.add_argument("--B", type=int, default=19)
    add_common(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("validate", help="run a built-in validation check")
    p.add_argument("check", choices=sorted(_VALIDATORS))
    p.add_argument("--draws", type=int, default=20000)
    add_common(p)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
