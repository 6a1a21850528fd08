"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
Set CLUST_LOG (DEBUG, INFO, WARNING, ...) for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algorithm import CentrexConfig, ClusteringResult, centrex, wald_threshold
from .baselines import kmeanspp, meanshift_cluster, xmeans
from .bench import POLICIES, SUMMARY_COLUMNS, COLUMNS, BenchPlan, resolve_covariances, run_bench, write_table
from .geometry import DatasetCovariances, ScaledIdentity
from .kernels import parse_kernel
from .metrics import evaluate
from .synthdata import (
    DataFormatError,
    Dataset,
    GroundTruth,
    InfeasibleScenario,
    Scenario,
    generate,
    load_csv,
    load_ruspini,
    write_csv,
)
from .variance_mle import MleConfig, estimate_covariances_mle, estimate_sigma

log = logging.getLogger("centrex")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _truth_path(data_path: str) -> Path:
    p = Path(data_path)
    return p.with_name(p.stem + ".truth.json")


def _load_dataset(path: str) -> Dataset:
    if path == "builtin:ruspini":
        return load_ruspini()
    if not Path(path).is_file():
        raise ConfigError(f"no such data file: {path}")
    return load_csv(path)


def _load_truth(path: str | None, data_path: str) -> GroundTruth | None:
    if path is None:
        auto = _truth_path(data_path)
        if not auto.is_file():
            return None
        path = str(auto)
    elif not Path(path).is_file():
        raise ConfigError(f"no such truth file: {path}")
    return GroundTruth.from_dict(json.loads(Path(path).read_text()))


def _mle_config(args, n: int) -> MleConfig:
    P = args.P if args.P is not None else min(50, n)
    if P > n:
        raise ConfigError(f"P={P} exceeds the number of points N={n}")
    base = ScaledIdentity(1.0)
    if getattr(args, "C", None):
        base = _base_cov(args.C)
    return MleConfig(P=P, M=args.M, base_cov=base, seed=args.seed)


def _read_json_arg(text: str):
    p = Path(text)
    if p.is_file():
        return json.loads(p.read_text())
    return json.loads(text)


def _base_cov(text: str):
    spec = _read_json_arg(text)
    probe = DatasetCovariances.from_dict(spec, 1, _spec_dim(spec))
    return probe.model(0)


def _spec_dim(spec: dict) -> int:
    for key in ("lambda2", "delta"):
        if key in spec:
            return len(spec[key])
    return 1


def _covariances(args, ds: Dataset, truth: GroundTruth | None, rng) -> tuple[DatasetCovariances, dict]:
    """Turn --cov into covariances; returns (covs, provenance info)."""
    policy = args.cov or ("known" if truth is not None and truth.covariances is not None else "scaled:auto-mle")
    n, d = ds.points.shape
    info: dict = {"policy": policy}
    if policy in ("mle", "scaled:auto-mle"):
        covs, est = estimate_covariances_mle(ds.points, _mle_config(args, n), rng)
        info["sigma_estimate"] = est.to_dict()
        return covs, info
    if policy.startswith("sigma:"):
        sigma = float(policy.split(":", 1)[1])
        if sigma <= 0:
            raise ConfigError("sigma must be positive")
        return DatasetCovariances.shared_model(ScaledIdentity(sigma**2), n, d), info
    if policy.startswith("file:"):
        spec = json.loads(Path(policy[5:]).read_text())
        return DatasetCovariances.from_dict(spec, n, d), info
    if policy in POLICIES:
        if truth is None:
            raise ConfigError(f"covariance policy {policy!r} needs a truth sidecar (--truth)")
        scenario = truth.scenario or Scenario("fixed", 0.0, d=d, n=n)
        return resolve_covariances(policy, ds.points, truth, scenario, _mle_config(args, n), rng), info
    raise ConfigError(f"unknown covariance policy {policy!r}")


def _kernel(args, d: int):
    spec = args.kernel
    if spec == "flat" and ":" not in spec:
        return parse_kernel(spec, d, sigma=wald_threshold(d, args.alpha))
    return parse_kernel(spec, d)


# Subcommands ------------------------------------------------------------------


def cmd_generate(args) -> int:
    try:
        scenario = Scenario(
            args.scenario,
            args.sigma,
            args.sigma_max,
            args.d,
            args.n,
            (args.k_min, args.k_max),
            args.A,
            args.mu_min,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    points, truth = generate(scenario, rng)
    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_suffix(".csv")
    truth_path = stem.with_name(stem.name + ".truth.json")
    write_csv(csv_path, points)
    side = truth.to_dict()
    side["seed"] = args.seed
    side["version"] = __version__
    truth_path.write_text(json.dumps(side, sort_keys=True) + "\n")
    log.info("wrote %s and %s", csv_path, truth_path)
    print(json.dumps({"data": str(csv_path), "truth": str(truth_path), "K": truth.K}))
    return EXIT_OK


def cmd_cluster(args) -> int:
    ds = _load_dataset(args.data)
    truth = _load_truth(args.truth, args.data) if args.data != "builtin:ruspini" else None
    n, d = ds.points.shape
    rng = np.random.default_rng(args.seed)
    if args.epsilon_f is not None:
        eps_f = args.epsilon_f
    elif truth is not None and truth.scenario is not None:
        eps_f = truth.scenario.mu_min / (2.0 * d)
    else:
        eps_f = 1.0

    info: dict = {}
    if args.algo in ("centrex", "meanshift"):
        covs, info = _covariances(args, ds, truth, rng)
        cfg = CentrexConfig(
            epsilon_e=args.epsilon_e,
            epsilon_f=eps_f,
            alpha=args.alpha,
            max_iters=args.max_iters,
            kernel=_kernel(args, d),
            seed=args.seed,
        )
        result = centrex(ds.points, covs, cfg, rng) if args.algo == "centrex" else meanshift_cluster(ds.points, covs, cfg)
    elif args.algo == "kmeanspp":
        k = args.k if args.k is not None else (truth.K if truth is not None else None)
        if k is None:
            raise ConfigError("kmeanspp needs --k (or a truth sidecar)")
        result = kmeanspp(ds.points, k, args.restarts, rng)
    else:
        result = xmeans(ds.points, range(1, min(args.k_max, n) + 1), args.restarts, rng)

    out = result.to_dict()
    out["algorithm"] = args.algo
    out["config"] = {
        "alpha": args.alpha,
        "epsilon_e": args.epsilon_e,
        "epsilon_f": eps_f,
        "max_iters": args.max_iters,
        "kernel": args.kernel,
        "seed": args.seed,
    }
    out.update(info)
    labels = truth.labels if truth is not None else ds.labels
    if labels is not None:
        out["evaluation"] = evaluate(labels, result, ds.points).to_dict()
    _emit(out, args.out)
    return EXIT_OK


def cmd_estimate_sigma(args) -> int:
    ds = _load_dataset(args.data)
    cfg = _mle_config(args, ds.n)
    est = estimate_sigma(ds.points, cfg, np.random.default_rng(args.seed))
    _emit(est.to_dict(), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ds = _load_dataset(args.data)
    truth = _load_truth(args.truth, args.data)
    labels = truth.labels if truth is not None else ds.labels
    if labels is None:
        raise ConfigError("no ground-truth labels (label column or --truth)")
    pred = json.loads(Path(args.result).read_text())
    result = ClusteringResult(np.asarray(pred["centroids"], dtype=float), np.asarray(pred["labels"], dtype=int))
    _emit(evaluate(labels, result, ds.points).to_dict(), args.out)
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_bench(args) -> int:
    try:
        plan = BenchPlan(
            scenario=args.scenario,
            sigmas=tuple(args.sigmas),
            trials=args.trials,
            roster=tuple(r for r in args.roster.split(",") if r.strip()),
            seed=args.seed,
            d=args.d,
            n=args.n,
            k_range=(args.k_min, args.k_max),
            A=args.A,
            mu_min=args.mu_min,
            alpha=args.alpha,
            epsilon_e=args.epsilon_e,
            epsilon_f=args.epsilon_f,
            max_iters=args.max_iters,
            P=args.P if args.P is not None else min(50, args.n),
            M=args.M,
            restarts=args.restarts,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows, summary = run_bench(plan, jobs=args.jobs, timing=args.timing)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_table(out, rows, COLUMNS)
    summary_path = Path(args.summary) if args.summary else out.with_name(out.stem + ".summary.csv")
    write_table(summary_path, summary, SUMMARY_COLUMNS)
    failed = sum(r["status"] != "ok" for r in rows)
    log.info("%d rows (%d failed) -> %s; summary -> %s", len(rows), failed, out, summary_path)
    return EXIT_OK


# Parser -----------------------------------------------------------------------


def _add_algo_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", default="wald", help='"wald", "gauss[:c=..,sigma=..]" or "flat[:h=..]"')
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--epsilon-e", type=float, default=1e-3)
    p.add_argument("--epsilon-f", type=float, default=None, help="default mu_min/(2d) with a truth sidecar, else 1")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--P", type=int, default=None, help="MLE subsample size (default min(50, N))")
    p.add_argument("--M", type=int, default=None, help="MLE same-cluster pair count (default P)")
    p.add_argument("--restarts", type=int, default=10)


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="fixed", choices=["fixed", "uniform_diagonal", "bimodal"])
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--A", type=float, default=20.0)
    p.add_argument("--mu-min", type=float, default=200.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="centrex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset CSV plus a truth JSON sidecar")
    _add_scenario_flags(g)
    g.add_argument("--sigma", "--sigma-min", dest="sigma", type=float, default=5.0)
    g.add_argument("--sigma-max", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="dataset", help="output stem: <stem>.csv and <stem>.truth.json")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", help="cluster a CSV dataset and print the result as JSON")
    c.add_argument("data", help='CSV path, or "builtin:ruspini"')
    c.add_argument("--algo", default="centrex", choices=["centrex", "meanshift", "kmeanspp", "xmeans"])
    _add_algo_flags(c)
    c.add_argument(
        "--cov",
        default=None,
        help="known | true_delta | mle | scaled:auto-mle | sigma:<s> | file:<json> | "
        "sigma_min | sigma_max | sigma_mean | mid_interval",
    )
    c.add_argument("--truth", default=None, help="truth JSON (default <data stem>.truth.json if present)")
    c.add_argument("--k", type=int, default=None, help="K for kmeanspp")
    c.add_argument("--k-max", type=int, default=10, help="largest K searched by xmeans")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("estimate-sigma", help="maximum-likelihood noise scale from the minimum pairwise distance")
    e.add_argument("data")
    e.add_argument("--P", type=int, default=None)
    e.add_argument("--M", type=int, default=None)
    e.add_argument("--C", default=None, help="base covariance spec as JSON text or file (default identity)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_estimate_sigma)

    v = sub.add_parser("evaluate", help="score a cluster result JSON against ground truth")
    v.add_argument("data")
    v.add_argument("result")
    v.add_argument("--truth", default=None)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="sigma sweep: per-trial CSV plus per-grid-point summary CSV")
    _add_scenario_flags(b)
    _add_algo_flags(b)
    b.add_argument("--sigmas", type=_float_list, default=[5.0], help="comma-separated sigma_min grid")
    b.add_argument("--trials", type=int, default=50)
    b.add_argument("--roster", default="centrex-wald-known", help="comma-separated <algo>[-<kernel>[-<policy>]]")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--timing", action="store_true", help="fill wall_ms (makes output non-reproducible)")
    b.add_argument("--out", default="bench.csv")
    b.add_argument("--summary", default=None, help="default <out stem>.summary.csv")
    b.set_defaults(func=cmd_bench)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("CLUST_LOG", "WARNING").upper()
    if level.isdigit():
        level = int(level)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataFormatError, InfeasibleScenario, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"centrex: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"centrex: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
