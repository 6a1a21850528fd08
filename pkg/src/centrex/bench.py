"""Seeded sigma sweeps over synthetic scenarios, one CSV row per (trial, algorithm)."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .algorithm import CentrexConfig, centrex, wald_threshold
from .baselines import kmeanspp, meanshift_cluster, xmeans
from .geometry import KIND_DIAGONAL, DatasetCovariances, ScaledIdentity
from .kernels import FlatKernel, GaussianKernel, WaldKernel
from .metrics import evaluate
from .synthdata import GroundTruth, InfeasibleScenario, Scenario, generate
from .variance_mle import MleConfig, estimate_covariances_mle

log = logging.getLogger(__name__)

ALGORITHMS = ("centrex", "meanshift", "kmeanspp", "xmeans")
KERNELS = ("wald", "gauss", "flat")
POLICIES = ("known", "true_delta", "mle", "sigma_min", "sigma_max", "sigma_mean", "mid_interval")

COLUMNS = [
    "scenario",
    "seed",
    "algorithm",
    "sigma_min",
    "K_true",
    "K_hat",
    "error_rate",
    "silhouette",
    "wall_ms",
    "n_searches",
    "status",
    "config_hash",
    "version",
]
SUMMARY_COLUMNS = [
    "scenario",
    "sigma_min",
    "algorithm",
    "trials",
    "n_ok",
    "correct_K_rate",
    "mean_error_rate",
    "mean_K_hat",
    "mean_silhouette",
]

NUMERIC_ERRORS = (ArithmeticError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class RosterEntry:
    """``<algo>[-<kernel>[-<policy>]]``, e.g. ``centrex-wald-mle`` or ``kmeanspp``."""

    algorithm: str
    kernel: str = "wald"
    policy: str = "known"

    @classmethod
    def parse(cls, name: str) -> "RosterEntry":
        parts = name.strip().split("-", 2)
        algo = parts[0]
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algo!r} in roster entry {name!r}")
        if algo in ("kmeanspp", "xmeans"):
            if len(parts) > 1:
                raise ValueError(f"{algo} takes no kernel or covariance policy: {name!r}")
            return cls(algo, "", "")
        kernel = parts[1] if len(parts) > 1 else "wald"
        policy = parts[2] if len(parts) > 2 else "known"
        if kernel not in KERNELS:
            raise ValueError(f"unknown kernel {kernel!r} in roster entry {name!r}")
        if policy not in POLICIES:
            raise ValueError(f"unknown covariance policy {policy!r} in roster entry {name!r}")
        return cls(algo, kernel, policy)

    @property
    def name(self) -> str:
        return "-".join(p for p in (self.algorithm, self.kernel, self.policy) if p)


@dataclass(frozen=True)
class BenchPlan:
    scenario: str = "fixed"
    sigmas: tuple[float, ...] = (5.0,)
    trials: int = 50
    roster: tuple[str, ...] = ("centrex-wald-known",)
    seed: int = 0
    d: int = 100
    n: int = 400
    k_range: tuple[int, int] = (2, 10)
    A: float = 20.0
    mu_min: float = 200.0
    sigma_span: float = 4.0  # sigma_max - sigma_min for the non-fixed scenarios
    alpha: float = 1e-3
    epsilon_e: float = 1e-3
    epsilon_f: float | None = None  # None -> mu_min / (2 d)
    max_iters: int = 100
    P: int = 50
    M: int | None = None
    restarts: int = 10
    entries: tuple[RosterEntry, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.roster:
            raise ValueError("roster must not be empty")
        if not self.sigmas:
            raise ValueError("sigma grid must not be empty")
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "roster", tuple(self.roster))
        object.__setattr__(self, "k_range", tuple(int(k) for k in self.k_range))
        object.__setattr__(self, "entries", tuple(RosterEntry.parse(r) for r in self.roster))
        for s in self.sigmas:
            self.scenario_at(s)  # validate early
        if self.P > self.n:
            raise ValueError(f"P={self.P} exceeds N={self.n}")

    @property
    def fusion_threshold(self) -> float:
        return self.epsilon_f if self.epsilon_f is not None else self.mu_min / (2.0 * self.d)

    def scenario_at(self, sigma_min: float) -> Scenario:
        smax = sigma_min if self.scenario == "fixed" else sigma_min + self.sigma_span
        return Scenario(self.scenario, sigma_min, smax, self.d, self.n, self.k_range, self.A, self.mu_min)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("entries", None)
        out["sigmas"] = list(self.sigmas)
        out["roster"] = list(self.roster)
        out["k_range"] = list(self.k_range)
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def resolve_covariances(
    policy: str,
    points: np.ndarray,
    truth: GroundTruth,
    scenario: Scenario,
    mle: MleConfig | None = None,
    rng: np.random.Generator | None = None,
) -> DatasetCovariances:
    """Covariances handed to the clustering algorithm under a named policy."""
    n, d = points.shape
    if policy in ("known", "true_delta"):
        if truth.covariances is None:
            raise ValueError("true covariances are degenerate (sigma = 0)")
        return truth.covariances
    if policy == "mle":
        covs, _ = estimate_covariances_mle(points, mle or MleConfig(), rng)
        return covs
    if policy in ("sigma_min", "sigma_max", "sigma_mean"):
        sigma = {"sigma_min": scenario.sigma_min, "sigma_max": scenario.sigma_max, "sigma_mean": scenario.sigma_mean}[
            policy
        ]
        if sigma <= 0:
            raise ValueError(f"{policy} is zero")
        return DatasetCovariances.shared_model(ScaledIdentity(float(sigma) ** 2), n, d)
    if policy == "mid_interval":
        if truth.interval_mid is not None:
            mid = np.asarray(truth.interval_mid, dtype=float)
        else:
            mid = np.full(n, scenario.sigma_mean)
        return DatasetCovariances(np.repeat((mid**2)[:, None], d, axis=1), None, KIND_DIAGONAL)
    raise ValueError(f"unknown covariance policy {policy!r}")


def kernel_for(name: str, d: int, alpha: float, covs: DatasetCovariances):
    """Roster kernel. Distances are already covariance-normalized, so the
    Gaussian scale equals the mean standard deviation and the flat radius is
    the Wald threshold."""
    if name == "wald":
        return WaldKernel(d)
    if name == "gauss":
        return GaussianKernel(c=5.0, sigma=float(math.sqrt(covs.variances.mean())))
    if name == "flat":
        return FlatKernel(wald_threshold(d, alpha))
    raise ValueError(f"unknown kernel {name!r}")


def _trial_seed(plan: BenchPlan, g: int, t: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([plan.seed, g, t])


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run_trial(args) -> list[dict]:
    plan, g, t, timing, version = args
    sigma = plan.sigmas[g]
    scenario = plan.scenario_at(sigma)
    ss = _trial_seed(plan, g, t)
    seed_value = int(ss.generate_state(1, np.uint32)[0])
    data_ss, *algo_ss = ss.spawn(1 + len(plan.entries))
    base = {
        "scenario": plan.scenario,
        "seed": seed_value,
        "sigma_min": sigma,
        "config_hash": plan.config_hash(),
        "version": version,
    }
    try:
        points, truth = generate(scenario, np.random.default_rng(data_ss))
    except InfeasibleScenario as exc:
        log.warning("grid %d trial %d: %s", g, t, exc)
        return [{**base, "algorithm": e.name, "status": "failed:InfeasibleScenario"} for e in plan.entries]

    rows = []
    for entry, a_ss in zip(plan.entries, algo_ss):
        row = {**base, "algorithm": entry.name, "K_true": truth.K}
        rng = np.random.default_rng(a_ss)
        t0 = time.perf_counter()
        try:
            result = _run_entry(plan, entry, points, truth, scenario, rng)
        except (ValueError, *NUMERIC_ERRORS) as exc:
            log.warning("grid %d trial %d %s: %s", g, t, entry.name, exc)
            row["status"] = f"failed:{type(exc).__name__}"
            rows.append(row)
            continue
        elapsed = (time.perf_counter() - t0) * 1e3
        report = evaluate(truth.labels, result, points)
        row.update(
            K_hat=report.K_hat,
            error_rate=report.error_rate,
            silhouette=report.silhouette,
            wall_ms=round(elapsed, 3) if timing else None,
            n_searches=result.diagnostics.get("n_searches"),
            status="ok",
        )
        rows.append(row)
    return rows


def _run_entry(plan, entry: RosterEntry, points, truth, scenario, rng):
    if entry.algorithm == "kmeanspp":
        return kmeanspp(points, truth.K, plan.restarts, rng)
    if entry.algorithm == "xmeans":
        lo, hi = 1, min(10, points.shape[0])
        return xmeans(points, range(lo, hi + 1), plan.restarts, rng)
    mle = MleConfig(P=plan.P, M=plan.M)
    covs = resolve_covariances(entry.policy, points, truth, scenario, mle, rng)
    cfg = CentrexConfig(
        epsilon_e=plan.epsilon_e,
        epsilon_f=plan.fusion_threshold,
        alpha=plan.alpha,
        max_iters=plan.max_iters,
        kernel=kernel_for(entry.kernel, points.shape[1], plan.alpha, covs),
    )
    if entry.algorithm == "centrex":
        return centrex(points, covs, cfg, rng)
    return meanshift_cluster(points, covs, cfg)


def summarize(plan: BenchPlan, rows: list[dict]) -> list[dict]:
    out = []
    for g, sigma in enumerate(plan.sigmas):
        for entry in plan.entries:
            sel = [r for r in rows if r["sigma_min"] == sigma and r["algorithm"] == entry.name]
            ok = [r for r in sel if r.get("status") == "ok"]

            def mean(key, rs=ok):
                return float(np.mean([r[key] for r in rs])) if rs else None

            out.append(
                {
                    "scenario": plan.scenario,
                    "sigma_min": sigma,
                    "algorithm": entry.name,
                    "trials": len(sel),
                    "n_ok": len(ok),
                    "correct_K_rate": float(np.mean([r["K_hat"] == r["K_true"] for r in ok])) if ok else None,
                    "mean_error_rate": mean("error_rate"),
                    "mean_K_hat": mean("K_hat"),
                    "mean_silhouette": mean("silhouette"),
                }
            )
    return out


def run_bench(plan: BenchPlan, jobs: int = 1, timing: bool = False) -> tuple[list[dict], list[dict]]:
    """Run every (grid point, trial) task. Row order never depends on ``jobs``."""
    from . import __version__

    tasks = [(plan, g, t, timing, __version__) for g in range(len(plan.sigmas)) for t in range(plan.trials)]
    if jobs <= 1:
        chunks = [run_trial(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(run_trial, tasks))
    rows = [r for chunk in chunks for r in chunk]
    return rows, summarize(plan, rows)


def write_table(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])
