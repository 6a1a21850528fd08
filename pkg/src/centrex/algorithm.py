"""Centroid estimation with Wald-test marking, fusion and assignment."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import specfun
from .geometry import DatasetCovariances, mahalanobis_sq
from .kernels import WaldKernel
from .meanshift import IterationConfig, Problem, iterate_to_fixed_point


@dataclass(frozen=True)
class CentrexConfig:
    epsilon_e: float = 1e-3
    epsilon_f: float = 1.0
    alpha: float = 1e-3
    max_iters: int = 100
    kernel: Any = None  # None -> Wald kernel of the data dimension
    seed: int = 0
    use_init_heuristic: bool = True
    track_cost: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not (self.epsilon_e > 0 and self.epsilon_f > 0):
            raise ValueError("epsilon_e and epsilon_f must be positive")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def iteration(self) -> IterationConfig:
        return IterationConfig(self.epsilon_e, self.max_iters, self.use_init_heuristic, self.track_cost)

    def kernel_for(self, d: int):
        return self.kernel if self.kernel is not None else WaldKernel(d)


@dataclass
class ClusteringResult:
    centroids: np.ndarray
    labels: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def K_hat(self) -> int:
        return int(self.centroids.shape[0])

    def to_dict(self) -> dict:
        return {
            "K_hat": self.K_hat,
            "centroids": self.centroids.tolist(),
            "labels": self.labels.tolist(),
            "diagnostics": self.diagnostics,
        }


@functools.lru_cache(maxsize=256)
def wald_threshold(d: int, alpha: float) -> float:
    """mu(alpha) = sqrt(F^-1_chi2_d(1 - alpha))."""
    return math.sqrt(specfun.chi2_quantile(d, 1.0 - alpha))


def wald_test(x, cov, alpha: float) -> bool:
    """True when the size-alpha Wald test rejects a zero mean for x ~ N(xi, cov)."""
    x = np.asarray(x, dtype=float)
    return mahalanobis_sq(x, cov) > wald_threshold(x.size, alpha) ** 2


def estimate_centroids(data, covs: DatasetCovariances, cfg: CentrexConfig, rng: np.random.Generator):
    """Pick / estimate / mark until every point is marked.

    Returns the (K0, d) array of fixed points, in discovery order, and a
    diagnostics dict.
    """
    prob = Problem(data, covs)
    n, d = prob.n, prob.d
    kernel = cfg.kernel_for(d)
    it_cfg = cfg.iteration()
    thr2 = wald_threshold(d, cfg.alpha) ** 2

    unmarked = np.ones(n, dtype=bool)
    found: list[np.ndarray] = []
    searches: list[dict] = []
    while unmarked.any():
        pool = np.flatnonzero(unmarked)
        star = int(pool[rng.integers(pool.size)])
        record: dict[str, Any] = {"seed_index": star}
        try:
            phi, trace = iterate_to_fixed_point(
                prob.data[star], None, covs, kernel, it_cfg, init_cov_boost=covs.model(star), problem=prob
            )
        except (ArithmeticError, FloatingPointError, np.linalg.LinAlgError) as exc:
            record["error"] = str(exc)
            unmarked[star] = False
            searches.append(record)
            continue
        found.append(phi)
        record.update(trace.summary())
        marked = unmarked & (prob.sq_dist(prob.to_eigen(phi)) <= thr2)
        marked[star] = True
        record["n_marked"] = int(marked.sum())
        unmarked &= ~marked
        searches.append(record)

    centroids = np.array(found) if found else np.empty((0, d))
    return centroids, {"n_searches": len(searches), "searches": searches, "threshold": math.sqrt(thr2)}


def _row_distances(cs: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = cs - c
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def fuse(centroids, epsilon_f: float, d: int | None = None):
    """Merge the closest pair into its midpoint while |phi - phi'| / d <= epsilon_f.

    Returns (fused centroids, merge log). Closest-pair ties go to the
    lexicographically smallest index pair; the midpoint takes the lower
    index's slot. Indices in the log refer to the list as it stood before
    each merge.
    """
    if epsilon_f <= 0:
        raise ValueError("epsilon_f must be positive")
    cs = np.atleast_2d(np.array(centroids, dtype=float))
    k0 = cs.shape[0]
    if d is None:
        d = cs.shape[1] if k0 else 1
    if k0 == 0:
        return np.empty((0, d)), []
    # Upper-triangular distance matrix; inf marks the diagonal, the lower
    # triangle and retired slots. Slot order never changes, so a row-major
    # argmin is the lexicographic tie-break on current indices too.
    dist = np.full((k0, k0), np.inf)
    for i in range(k0 - 1):
        dist[i, i + 1 :] = _row_distances(cs[i + 1 :], cs[i])
    active = np.ones(k0, dtype=bool)
    merges = []
    for _ in range(k0 - 1):
        flat = int(np.argmin(dist))
        i, j = divmod(flat, k0)
        gap = float(dist[i, j]) / d
        if not gap <= epsilon_f:
            break
        rank = np.cumsum(active) - 1
        merges.append({"pair": [int(rank[i]), int(rank[j])], "gap": gap})
        cs[i] = 0.5 * (cs[i] + cs[j])
        active[j] = False
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        fresh = _row_distances(cs, cs[i])
        before = active.copy()
        before[i:] = False
        after = active.copy()
        after[: i + 1] = False
        dist[before, i] = fresh[before]
        dist[i, after] = fresh[after]
    return cs[active], merges


def assign(data, covs: DatasetCovariances, centroids):
    """Label each point by its Mahalanobis-closest centroid, drop empty clusters.

    Returns (kept centroids, labels in [0, K_hat)). Ties go to the lowest
    centroid index.
    """
    centroids = np.atleast_2d(np.asarray(centroids, dtype=float))
    if centroids.shape[0] == 0:
        raise ValueError("need at least one centroid")
    z = covs.to_eigenbasis(data)
    zc = covs.to_eigenbasis(centroids)
    # dist[n, k] = sum_i (z_ni - c_ki)^2 / var_ni
    dist = np.stack([np.einsum("ij,ij->i", (z - c) * covs.inv_variances, z - c) for c in zc], axis=1)
    raw = np.argmin(dist, axis=1)
    used = np.unique(raw)
    remap = np.full(centroids.shape[0], -1)
    remap[used] = np.arange(used.size)
    return centroids[used], remap[raw]


def centrex(data, covs: DatasetCovariances, cfg: CentrexConfig = CentrexConfig(), rng=None) -> ClusteringResult:
    """Estimate centroids, fuse them, assign points."""
    data = np.asarray(data, dtype=float)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    raw, diag = estimate_centroids(data, covs, cfg, rng)
    if raw.shape[0] == 0:
        raise ArithmeticError("every fixed-point search failed")
    fused, merges = fuse(raw, cfg.epsilon_f, data.shape[1])
    kept, labels = assign(data, covs, fused)
    diag.update(
        {
            "n_candidates": int(raw.shape[0]),
            "n_fused": int(fused.shape[0]),
            "merges": merges,
            "n_removed_empty": int(fused.shape[0] - kept.shape[0]),
        }
    )
    return ClusteringResult(kept, labels, diag)
