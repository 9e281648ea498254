"""Command-line front end: simulate, preprocess, fit, path, evaluate.

Every command is a deterministic function of its flags, seed, and input
files.  Exit codes: 0 success, 2 usage or configuration error, 3 solver
non-convergence (results are still written), 4 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import baselines, fileio, preprocess
from .cluster import extract_clusters, lambda_path, rand_index, select_by_k
from .exceptions import CggmError, ParseError, ShapeMismatchError
from .model import build_fusion_structure
from .solver import AdmmConfig, fit
from .synthetic import SCENARIOS, generate_instance, make_rng

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4


def _worker_count(jobs: int) -> int:
    cap = os.environ.get("CGGM_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = min(limit, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"CGGM_THREADS must be an integer, got {cap!r}")
    return max(1, min(jobs, limit))


def _parse_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got {text!r}")
    if not sizes:
        raise argparse.ArgumentTypeError("sizes must be non-empty")
    return sizes


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError(
            f"grid must be min:max:count[:log], got {text!r}"
        )
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be min:max:count[:log], got {text!r}")
    spacing = parts[3] if len(parts) == 4 else "linear"
    if spacing not in ("linear", "log"):
        raise argparse.ArgumentTypeError(f"grid spacing must be linear or log, got {spacing!r}")
    if count < 1:
        raise argparse.ArgumentTypeError("grid count must be >= 1")
    if hi < lo:
        raise argparse.ArgumentTypeError("grid max must be >= min")
    if lo < 0:
        raise argparse.ArgumentTypeError("grid values must be >= 0")
    if spacing == "log":
        if lo <= 0:
            raise argparse.ArgumentTypeError("log grid requires min > 0")
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


def _add_solver_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--rho1", type=float, default=1.0)
    parser.add_argument("--rho2", type=float, default=1.0)
    parser.add_argument("--tol-abs", type=float, default=1e-5)
    parser.add_argument("--tol-rel", type=float, default=1e-4)
    parser.add_argument("--max-iters", type=int, default=2000)
    parser.add_argument(
        "--weights",
        default="uniform",
        help="fusion weight scheme: uniform, gaussian-knn, or file:PATH",
    )
    parser.add_argument("--weights-knn", type=int, default=5,
                        help="neighborhood size for gaussian-knn weights")
    parser.add_argument("--weights-phi", type=float, default=0.5,
                        help="kernel bandwidth for gaussian-knn weights")
    parser.add_argument("--fusion-tol", type=float, default=1e-3,
                        help="relative tolerance for declaring a pair fused")


def _solver_config(args, lam: float) -> AdmmConfig:
    return AdmmConfig(
        rho1=args.rho1,
        rho2=args.rho2,
        lam=lam,
        outer_max_iters=args.max_iters,
        outer_tol_abs=args.tol_abs,
        outer_tol_rel=args.tol_rel,
    )


def _fusion_from_args(args, data: np.ndarray):
    p = data.shape[1]
    scheme = args.weights
    if scheme == "uniform":
        return build_fusion_structure(p, "uniform")
    if scheme == "gaussian-knn":
        return build_fusion_structure(
            p, "gaussian-knn", data=data, knn=args.weights_knn, phi=args.weights_phi
        )
    if scheme.startswith("file:"):
        weights = fileio.read_weights_csv(scheme[len("file:"):], p)
        return build_fusion_structure(p, "explicit", pair_weights=weights)
    raise ValueError(f"unknown weight scheme {scheme!r}")


def _load_covariance(args):
    data = fileio.read_matrix_csv(args.data)
    centered = preprocess.center_columns(data)
    return data, preprocess.empirical_covariance(centered)


def _ensure_outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.scenario:
        spec = SCENARIOS[args.scenario]
        p, sizes, n = spec["p"], spec["sizes"], spec["n"]
    else:
        if args.p is None or args.sizes is None or args.n is None:
            raise ValueError("custom simulation requires --p, --sizes, and --n")
        p, sizes, n = args.p, args.sizes, args.n
    rng = make_rng(args.seed)
    truth, data = generate_instance(p, sizes, n, rng)
    out = _ensure_outdir(args.out)
    fileio.write_matrix_csv(os.path.join(out, "data.csv"), data)
    fileio.write_truth_json(os.path.join(out, "truth.json"), truth, args.seed)
    fileio.write_matrix_csv(os.path.join(out, "precision.csv"), truth.precision)
    print(f"simulated p={p} n={n} sizes={','.join(map(str, sizes))} seed={args.seed}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    steps = [s for s in args.steps.split(",") if s]
    if not steps:
        raise ValueError("--steps must name at least one step")
    data = fileio.read_matrix_csv(args.input)
    result = preprocess.apply_steps(data, steps)
    fileio.write_matrix_csv(args.output, result)
    print(f"preprocessed {args.input} -> {args.output} steps={','.join(steps)}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data, sigma_hat = _load_covariance(args)
    fusion = _fusion_from_args(args, data)
    config = _solver_config(args, args.lam)
    result = fit(sigma_hat, fusion, config)
    partition = extract_clusters(result.pair_blocks, fusion.p, fusion, args.fusion_tol)

    out = _ensure_outdir(args.out)
    fileio.write_matrix_csv(os.path.join(out, "theta.csv"), result.precision)
    fileio.write_labels_json(
        os.path.join(out, "labels.json"), partition,
        **{"lambda": args.lam, "converged": result.converged},
    )
    fileio.write_trace_csv(os.path.join(out, "trace.csv"), result.trace)
    status = "converged" if result.converged else "NOT converged"
    print(
        f"fit lambda={args.lam:g}: {status} after {result.iterations} iterations, "
        f"{partition.k} clusters"
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_path(args) -> int:
    data, sigma_hat = _load_covariance(args)
    fusion = _fusion_from_args(args, data)
    config = _solver_config(args, 0.0)
    points = lambda_path(sigma_hat, fusion, args.grid, config, rel_tol=args.fusion_tol)

    out = _ensure_outdir(args.out)
    fileio.write_path_json(os.path.join(out, "path.json"), points)
    if args.select_k is not None:
        chosen = select_by_k(points, args.select_k)
        fileio.write_path_json(os.path.join(out, "selected.json"), [chosen])
    for pt in points:
        flag = "" if pt.converged else "  [not converged]"
        print(f"lambda={pt.lam:.6g}  clusters={pt.num_clusters}{flag}")
    all_converged = all(pt.converged for pt in points)
    return EXIT_OK if all_converged else EXIT_NOT_CONVERGED


def _evaluate_one(method: str, args, index: int, truth_file: str):
    truth = fileio.read_truth_json(truth_file)
    reference = truth["partition"]
    k = args.k if args.k is not None else reference.k
    if method == "cggm":
        estimate = fileio.read_labels_json(args.labels[index])
    else:
        data = fileio.read_matrix_csv(args.data[index])
        if method == "kmeans":
            estimate = baselines.kmeans_cluster(
                data, k, make_rng(args.seed, index), restarts=args.restarts
            )
        elif method == "hc-euclidean":
            estimate = baselines.ward_cluster(baselines.euclidean_dissimilarity(data), k)
        elif method == "hc-corr":
            estimate = baselines.ward_cluster(baselines.correlation_dissimilarity(data), k)
        else:
            raise ValueError(f"unknown method {method!r}")
    if estimate.p != reference.p:
        raise ShapeMismatchError(
            f"labels ({estimate.p}) and truth ({reference.p}) disagree on p"
        )
    return rand_index(estimate, reference)


def cmd_evaluate(args) -> int:
    method = args.method
    if method == "cggm":
        if not args.labels:
            raise ValueError("--method cggm requires --labels")
        n_rep = len(args.labels)
    else:
        if not args.data:
            raise ValueError(f"--method {method} requires --data")
        n_rep = len(args.data)
    if len(args.truth) != n_rep:
        raise ShapeMismatchError(
            f"{n_rep} replicate inputs but {len(args.truth)} truth files"
        )

    workers = _worker_count(n_rep)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(
                pool.map(lambda i: _evaluate_one(method, args, i, args.truth[i]), range(n_rep))
            )
    else:
        scores = [_evaluate_one(method, args, i, args.truth[i]) for i in range(n_rep)]

    lines = ["method,replicate,rand_index"]
    for i, score in enumerate(scores, start=1):
        lines.append(f"{method},{i},{score:.6f}")
    mean = float(np.mean(scores))
    sd = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
    lines.append(f"{method},mean,{mean:.6f}")
    lines.append(f"{method},sd,{sd:.6f}")
    report = "\n".join(lines)
    print(report)
    if args.out:
        with fileio.atomic_write(args.out) as handle:
            handle.write(report + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cggm",
        description="Clustered Gaussian graphical models via symmetric convex clustering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic clustered instance")
    sim.add_argument("--scenario", choices=sorted(SCENARIOS))
    sim.add_argument("--p", type=int)
    sim.add_argument("--sizes", type=_parse_sizes)
    sim.add_argument("--n", type=int)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=".")
    sim.set_defaults(func=cmd_simulate)

    pre = sub.add_parser("preprocess", help="whiten/gaussianize/center a trace matrix")
    pre.add_argument("--input", required=True)
    pre.add_argument("--output", required=True)
    pre.add_argument("--steps", default="whiten,npn,center",
                     help="comma-separated subset of whiten,npn,center, applied in order")
    pre.set_defaults(func=cmd_preprocess)

    fit_p = sub.add_parser("fit", help="fit the model at one penalty value")
    fit_p.add_argument("--data", required=True)
    fit_p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    fit_p.add_argument("--out", default=".")
    _add_solver_flags(fit_p)
    fit_p.set_defaults(func=cmd_fit)

    path_p = sub.add_parser("path", help="sweep a penalty grid with warm starts")
    path_p.add_argument("--data", required=True)
    path_p.add_argument("--grid", required=True, type=_parse_grid,
                        help="min:max:count[:log]")
    path_p.add_argument("--select-k", type=int, default=None)
    path_p.add_argument("--out", default=".")
    _add_solver_flags(path_p)
    path_p.set_defaults(func=cmd_path)

    ev = sub.add_parser("evaluate", help="Rand index of estimates against ground truth")
    ev.add_argument("--method", required=True,
                    choices=["cggm", "kmeans", "hc-euclidean", "hc-corr"])
    ev.add_argument("--truth", nargs="+", required=True)
    ev.add_argument("--labels", nargs="+", help="label JSON files (method cggm)")
    ev.add_argument("--data", nargs="+", help="data CSV files (baseline methods)")
    ev.add_argument("--k", type=int, default=None,
                    help="cluster count for baselines (default: truth's k)")
    ev.add_argument("--restarts", type=int, default=10)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CggmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
