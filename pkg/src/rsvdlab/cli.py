"""Command-line interface: decomposition, the three applications, and the
experiment harness.

Every command writes its outputs under --out with fixed filenames and a
meta.json carrying the fully resolved configuration (including derived
seeds), so reruns with the same flags are byte-identical.  Exit codes:
0 success, 1 numerical failure, 2 usage or parse error.
"""

import argparse
from importlib import resources
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from .applications import (
    entry_ci_batch,
    exact_complete,
    match_labels,
    rsvd_complete,
    rsvd_missing_pca,
    rsvd_spectral_cluster,
)
from .clustering import DegenerateClusteringError
from .harness import emit_csv, load_plan, run_plan
from .linalg import RankDeficiencyError
from .mmio import read_matrix_market, write_csv, write_matrix_market
from .models import (
    gen_completion,
    gen_edm,
    gen_missing_pca,
    gen_sbm,
    symmetric_bernoulli,
)
from .rng import RngStream
from .sketch import SketchConfig, rs_rsvd_asym, rs_rsvd_sym

DEFAULT_SEED = 20240501

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    pass


def _resolve_seed(args):
    env = os.environ.get("RSVDLAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"RSVDLAB_SEED must be an integer, got {env!r}") from exc
    return args.seed


def _parse_gen(spec_str):
    """Parse 'kind:key=val,key=val' generator descriptions."""
    kind, _, rest = spec_str.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not key or not val:
                raise UsageError(f"malformed generator parameter {item!r}")
            try:
                params[key] = int(val)
            except ValueError:
                try:
                    params[key] = float(val)
                except ValueError:
                    params[key] = val
    return kind, params


def _resolve_a_n(args, n):
    if args.an == "log":
        return max(1, math.ceil(math.log(max(n, 2))))
    try:
        value = int(args.an)
    except ValueError as exc:
        raise UsageError(f"--an must be an integer or 'log', got {args.an!r}") from exc
    if value < 1:
        raise UsageError("--an must be >= 1")
    return value


def _sketch_config(args, n, k, stream):
    k_tilde = args.ktilde if args.ktilde is not None else k + 5
    return SketchConfig(k=k, k_tilde=k_tilde, a_n=_resolve_a_n(args, n),
                        g=args.g, stream=stream)


def _write_meta(out_dir, payload):
    path = Path(out_dir) / "meta.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _common_meta(args, seed, stream, extra):
    meta = {
        "command": args.command,
        "seed": seed,
        "stream": {"master_seed": stream.master_seed,
                   "stream_id": stream.stream_id},
        "g": getattr(args, "g", None),
        "ktilde": getattr(args, "ktilde", None),
        "an": getattr(args, "an", None),
    }
    meta.update(extra)
    return meta


def _add_sketch_flags(parser, default_g=2):
    parser.add_argument("--ktilde", type=int, default=None,
                        help="sketch width (default: k + 5)")
    parser.add_argument("--an", default="log",
                        help="number of repeated sketches, or 'log' for ceil(log n)")
    parser.add_argument("--g", type=int, default=default_g,
                        help="power-iteration count")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="master seed (env RSVDLAB_SEED overrides)")
    parser.add_argument("--out", required=True, help="output directory")


def _is_symmetric(a):
    return a.shape[0] == a.shape[1] and np.max(np.abs(a - a.T)) <= 1e-10 * max(
        1.0, float(np.max(np.abs(a))))


def cmd_svd(args):
    a = read_matrix_market(args.input)
    seed = _resolve_seed(args)
    stream = RngStream(seed, 0).child("svd")
    symmetric = _is_symmetric(a) if args.mode == "auto" else args.mode == "sym"
    if args.mode == "sym" and not _is_symmetric(a):
        raise UsageError("--sym requires a symmetric input matrix")
    cfg = _sketch_config(args, a.shape[1], args.k, stream)
    out = rs_rsvd_sym(a, cfg) if symmetric else rs_rsvd_asym(a, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix_market(out_dir / "U.mm", out.u_hat_g)
    write_csv(out_dir / "sigma.csv", ("sigma",),
              [(float(s),) for s in out.sigma_tilde])
    _write_meta(out_dir, _common_meta(args, seed, stream, {
        "input": str(args.input),
        "k": args.k,
        "symmetric": bool(symmetric),
        "chosen_sketch": int(out.chosen_sketch),
        "sigma_k_sketch": float(out.sigma_k_sketch),
    }))
    return EXIT_OK


def _load_adjacency(args, stream):
    if args.gen is not None:
        kind, params = _parse_gen(args.gen)
        if kind != "sbm":
            raise UsageError(f"cluster supports --gen sbm:..., got {kind!r}")
        n = int(params.get("n", 1000))
        k_blocks = int(params.get("K", 2))
        rho = float(params.get("rho", 1.0)) * n ** float(params.get("rho_exp", 0.0))
        b_diag = float(params.get("b_in", 0.8))
        b_off = float(params.get("b_out", 0.3))
        b = np.full((k_blocks, k_blocks), b_off)
        np.fill_diagonal(b, b_diag)
        pi = np.full(k_blocks, 1.0 / k_blocks)
        d = int(params.get("d", k_blocks))
        inst = gen_sbm(n, b, pi, rho, d, stream)
        return inst.a, inst.tau, {"generator": args.gen, "n": n, "rho": rho}
    if args.input is None:
        raise UsageError("provide an adjacency file or --gen sbm:...")
    a = read_matrix_market(args.input)
    truth = None
    if args.truth:
        truth = np.loadtxt(args.truth, dtype=np.int64, ndmin=1)
    return a, truth, {"input": str(args.input)}


def cmd_cluster(args):
    seed = _resolve_seed(args)
    base = RngStream(seed, 0)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reps = args.reps
    if reps > 1 and args.gen is None:
        raise UsageError("--reps > 1 requires --gen")
    recovery_rows = []
    first_labels = None
    meta_src = None
    for rep in range(reps):
        stream = base.child("cluster", rep)
        a, truth, src_meta = _load_adjacency(args, stream.child("model"))
        meta_src = src_meta
        cfg = _sketch_config(args, a.shape[0], args.d, stream.child("sketch"))
        result = rsvd_spectral_cluster(a, args.d, args.K, cfg,
                                       clusterer=args.clusterer, truth=truth)
        if rep == 0:
            first_labels = result.tau_hat
        if truth is not None:
            recovery_rows.append((rep, int(result.exact_recovery),
                                  float(result.error_rate)))
    write_csv(out_dir / "labels.csv", ("node", "label"),
              [(i, int(lab)) for i, lab in enumerate(first_labels)])
    extra = {"d": args.d, "K": args.K, "clusterer": args.clusterer,
             "reps": reps}
    extra.update(meta_src)
    if recovery_rows:
        write_csv(out_dir / "recovery.csv", ("replicate", "exact", "error_rate"),
                  recovery_rows)
        extra["recovery_frequency"] = float(
            np.mean([row[1] for row in recovery_rows]))
    _write_meta(out_dir, _common_meta(args, seed, base, extra))
    return EXIT_OK


def _load_observed(args, stream):
    if args.gen is not None:
        kind, params = _parse_gen(args.gen)
        if kind == "completion":
            inst = gen_completion(
                int(params.get("n", 500)), int(params.get("k", 3)),
                float(params.get("scale", 1.0)), float(params.get("p", 0.5)),
                float(params.get("sigma", 1.0)),
                bool(int(params.get("homogeneous", 1))), stream,
            )
            return inst.t_hat, inst.t, float(params.get("p", 0.5)), {"generator": args.gen}
        if kind == "edm":
            n = int(params.get("n", 300))
            p = float(params.get("p", 0.8))
            d_mat, _ = gen_edm(n, int(params.get("dim", 2)),
                               float(params.get("box", 10.0)), stream)
            gen = stream.child("mask").generator()
            omega = symmetric_bernoulli(n, p, gen)
            return omega * d_mat, d_mat, p, {"generator": args.gen}
        raise UsageError(f"complete supports --gen completion:... or edm:..., got {kind!r}")
    if args.input is None:
        raise UsageError("provide an observed matrix or --gen")
    return read_matrix_market(args.input), None, None, {"input": str(args.input)}


def cmd_complete(args):
    seed = _resolve_seed(args)
    base = RngStream(seed, 0).child("complete")
    t_hat, truth, gen_p, src_meta = _load_observed(args, base.child("model"))
    if args.p == "auto":
        p = "auto"
    elif args.p is None:
        if gen_p is None:
            raise UsageError("--p is required unless a generator supplies it")
        p = gen_p
    else:
        try:
            p = float(args.p)
        except ValueError as exc:
            raise UsageError(f"--p must be a probability or 'auto', got {args.p!r}") from exc
    cfg = _sketch_config(args, t_hat.shape[0], args.k, base.child("sketch"))
    if args.exact:
        result = exact_complete(t_hat, p, args.k, mode=args.mode)
    else:
        result = rsvd_complete(t_hat, p, args.k, cfg, mode=args.mode)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix_market(out_dir / "completed.mm", result.t_hat_g)
    ci_rows = []
    for ci_spec in args.ci or []:
        parts = ci_spec.split(",")
        if len(parts) != 3:
            raise UsageError(f"--ci expects 'i,j,alpha', got {ci_spec!r}")
        i, j, alpha = int(parts[0]), int(parts[1]), float(parts[2])
        ci = entry_ci_batch(result, t_hat, [(i, j)], alpha)[0]
        ci_rows.append((ci.i, ci.j, ci.alpha, ci.estimate, ci.v_hat, ci.lo, ci.hi))
    write_csv(out_dir / "ci.csv",
              ("i", "j", "alpha", "estimate", "v_hat", "lo", "hi"), ci_rows)
    extra = {"k": args.k, "p_used": result.p_used, "mode": result.mode,
             "exact": bool(args.exact)}
    extra.update(src_meta)
    if truth is not None:
        err = result.t_hat_g - truth
        extra["frob_err_per_n"] = float(np.linalg.norm(err)) / t_hat.shape[0]
        extra["max_err"] = float(np.max(np.abs(err)))
    _write_meta(out_dir, _common_meta(args, seed, base, extra))
    return EXIT_OK


def cmd_pca(args):
    seed = _resolve_seed(args)
    base = RngStream(seed, 0).child("pca")
    if args.gen is not None:
        kind, params = _parse_gen(args.gen)
        if kind != "pca":
            raise UsageError(f"pca supports --gen pca:..., got {kind!r}")
        inst = gen_missing_pca(
            int(params.get("d", 200)), int(params.get("m", 500)),
            int(params.get("k", 4)), float(params.get("p", 1.0)),
            float(params.get("sigma", 0.0)), base.child("model"),
        )
        x_obs = inst.x_obs
        p = float(params.get("p", 1.0))
        src_meta = {"generator": args.gen}
    else:
        if args.input is None:
            raise UsageError("provide an observed matrix or --gen pca:...")
        x_obs = read_matrix_market(args.input)
        if args.p is None:
            raise UsageError("--p is required with an input file")
        p = args.p
        src_meta = {"input": str(args.input)}
    cfg = _sketch_config(args, x_obs.shape[0], args.k, base.child("sketch"))
    u = rsvd_missing_pca(x_obs, p, args.k, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix_market(out_dir / "U.mm", u)
    extra = {"k": args.k, "p": p}
    extra.update(src_meta)
    _write_meta(out_dir, _common_meta(args, seed, base, extra))
    return EXIT_OK


def _locate_plan(plan_arg):
    path = Path(plan_arg)
    if path.exists():
        return path
    bundled = resources.files("rsvdlab").joinpath("plans", plan_arg)
    if bundled.is_file():
        return bundled
    bundled_json = resources.files("rsvdlab").joinpath("plans", plan_arg + ".json")
    if bundled_json.is_file():
        return bundled_json
    raise UsageError(f"plan {plan_arg!r} not found (no file and no bundled plan)")


def cmd_experiment(args):
    location = _locate_plan(args.plan)
    try:
        plan = load_plan(json.loads(location.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid plan JSON: {exc}") from exc
    except (KeyError, TypeError) as exc:
        raise UsageError(f"plan is missing required fields: {exc}") from exc
    if args.parallel is not None:
        from dataclasses import replace
        plan = replace(plan, parallelism=args.parallel)
    env_seed = os.environ.get("RSVDLAB_SEED")
    if env_seed is not None:
        from dataclasses import replace
        plan = replace(plan, master_seed=int(env_seed))
    records = run_plan(plan)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_csv(records, out_dir / "records.csv")
    _write_meta(out_dir, {
        "command": "experiment",
        "plan": {
            "kind": plan.kind,
            "model_params": plan.model_params,
            "n_grid": list(plan.n_grid),
            "g_list": list(plan.g_list),
            "replicates": plan.replicates,
            "master_seed": plan.master_seed,
            "parallelism": plan.parallelism,
        },
        "records": len(records),
    })
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rsvdlab",
        description="Randomized SVD laboratory: sketching, clustering, "
                    "completion, missing-data PCA, and Monte-Carlo plans.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_svd = sub.add_parser("svd", help="sketched SVD of a Matrix Market file")
    p_svd.add_argument("input", help="Matrix Market input path")
    p_svd.add_argument("--k", type=int, required=True, help="target rank")
    mode = p_svd.add_mutually_exclusive_group()
    mode.add_argument("--sym", dest="mode", action="store_const", const="sym",
                      help="treat input as symmetric")
    mode.add_argument("--asym", dest="mode", action="store_const", const="asym",
                      help="treat input as rectangular")
    p_svd.set_defaults(mode="auto")
    _add_sketch_flags(p_svd)
    p_svd.set_defaults(func=cmd_svd)

    p_cluster = sub.add_parser("cluster", help="spectral clustering of a graph")
    p_cluster.add_argument("input", nargs="?", default=None,
                           help="adjacency Matrix Market path")
    p_cluster.add_argument("--gen", default=None,
                           help="generator, e.g. sbm:n=1000,K=2,rho=1")
    p_cluster.add_argument("--d", type=int, required=True,
                           help="embedding dimension")
    p_cluster.add_argument("--K", type=int, required=True,
                           help="number of clusters")
    p_cluster.add_argument("--truth", default=None,
                           help="path to true labels (one per line)")
    p_cluster.add_argument("--reps", type=int, default=1,
                           help="generator replicates")
    p_cluster.add_argument("--clusterer", choices=("kmeans", "kmedians"),
                           default="kmeans")
    _add_sketch_flags(p_cluster)
    p_cluster.set_defaults(func=cmd_cluster)

    p_complete = sub.add_parser("complete", help="low-rank matrix completion")
    p_complete.add_argument("input", nargs="?", default=None,
                            help="observed Matrix Market path")
    p_complete.add_argument("--gen", default=None,
                            help="generator, e.g. completion:n=500,k=3,p=0.5 "
                                 "or edm:n=300,p=0.8")
    p_complete.add_argument("--p", default=None,
                            help="sampling probability or 'auto'")
    p_complete.add_argument("--k", type=int, required=True, help="target rank")
    p_complete.add_argument("--mode", choices=("one_sided", "symmetrized"),
                            default="one_sided")
    p_complete.add_argument("--ci", action="append", default=None,
                            metavar="I,J,ALPHA",
                            help="entry confidence interval; repeatable")
    p_complete.add_argument("--exact", action="store_true",
                            help="use the exact eigendecomposition baseline")
    _add_sketch_flags(p_complete, default_g=5)
    p_complete.set_defaults(func=cmd_complete)

    p_pca = sub.add_parser("pca", help="PCA from partially observed data")
    p_pca.add_argument("input", nargs="?", default=None,
                       help="observed Matrix Market path")
    p_pca.add_argument("--gen", default=None,
                       help="generator, e.g. pca:d=200,m=500,k=4,p=0.3")
    p_pca.add_argument("--p", type=float, default=None,
                       help="sampling probability")
    p_pca.add_argument("--k", type=int, required=True, help="target rank")
    _add_sketch_flags(p_pca, default_g=3)
    p_pca.set_defaults(func=cmd_pca)

    p_exp = sub.add_parser("experiment", help="run a Monte-Carlo plan")
    p_exp.add_argument("--plan", required=True,
                       help="plan JSON path or bundled plan name")
    p_exp.add_argument("--out", required=True, help="output directory")
    p_exp.add_argument("--parallel", type=int, default=None,
                       help="override plan parallelism")
    p_exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RankDeficiencyError, DegenerateClusteringError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
