"""Comparison algorithms: all-points mean shift, K-means++, silhouette X-means."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .algorithm import CentrexConfig, ClusteringResult, assign, fuse
from .geometry import DatasetCovariances
from .meanshift import Problem, iterate_to_fixed_point
from .metrics import pairwise_distances, silhouette


def meanshift_cluster(data, covs: DatasetCovariances, cfg: CentrexConfig = CentrexConfig()) -> ClusteringResult:
    """Run the fixed-point search from every point, then fuse and assign.

    Unlike ``centrex`` there is no marking and no first-step covariance
    boost: every point is a start, and each search uses the plain map.
    """
    prob = Problem(data, covs)
    kernel = cfg.kernel_for(prob.d)
    it_cfg = replace(cfg.iteration(), use_init_heuristic=False)
    found = []
    failures = []
    for n in range(prob.n):
        try:
            phi, _ = iterate_to_fixed_point(prob.data[n], None, covs, kernel, it_cfg, None, problem=prob)
        except (ArithmeticError, FloatingPointError, np.linalg.LinAlgError) as exc:
            failures.append({"seed_index": n, "error": str(exc)})
            continue
        found.append(phi)
    if not found:
        raise ArithmeticError("every fixed-point search failed")
    raw = np.array(found)
    fused, merges = fuse(raw, cfg.epsilon_f, prob.d)
    kept, labels = assign(prob.data, covs, fused)
    diag = {
        "n_searches": prob.n,
        "n_candidates": int(raw.shape[0]),
        "n_fused": int(fused.shape[0]),
        "n_merges": len(merges),
        "failures": failures,
    }
    return ClusteringResult(kept, labels, diag)


def _inertia(data, centers, labels) -> float:
    diff = data - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _sq_dists(data, centers) -> np.ndarray:
    return np.stack([np.einsum("ij,ij->i", data - c, data - c) for c in centers], axis=1)


def _kmeanspp_seed(data, K, rng) -> np.ndarray:
    n = data.shape[0]
    centers = [data[rng.integers(n)]]
    closest = np.einsum("ij,ij->i", data - centers[0], data - centers[0])
    for _ in range(1, K):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers.append(data[idx])
        closest = np.minimum(closest, np.einsum("ij,ij->i", data - data[idx], data - data[idx]))
    return np.array(centers)


def lloyd(data, centers, max_iter: int = 300, tol: float = 1e-8):
    """Lloyd iterations until the relative inertia change drops below ``tol``.

    Returns (centers, labels, inertia history).
    """
    centers = np.array(centers, dtype=float)
    labels = np.argmin(_sq_dists(data, centers), axis=1)
    history = [_inertia(data, centers, labels)]
    for _ in range(max_iter):
        for k in range(centers.shape[0]):
            members = labels == k
            if members.any():
                centers[k] = data[members].mean(axis=0)
        labels = np.argmin(_sq_dists(data, centers), axis=1)
        history.append(_inertia(data, centers, labels))
        prev, cur = history[-2], history[-1]
        if prev - cur <= tol * max(prev, np.finfo(float).tiny):
            break
    return centers, labels, history


def kmeanspp(data, K: int, restarts: int = 10, rng=None, max_iter: int = 300, tol: float = 1e-8) -> ClusteringResult:
    """Best of ``restarts`` K-means++ seeded Lloyd runs, by inertia."""
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"need 1 <= K <= N (K={K}, N={n})")
    if rng is None:
        rng = np.random.default_rng(0)
    best = None
    for _ in range(restarts):
        centers, labels, history = lloyd(data, _kmeanspp_seed(data, K, rng), max_iter, tol)
        if best is None or history[-1] < best[2][-1]:
            best = (centers, labels, history)
    centers, labels, history = best
    used = np.unique(labels)
    remap = np.full(K, -1)
    remap[used] = np.arange(used.size)
    diag = {"inertia": history[-1], "n_lloyd": len(history) - 1, "restarts": restarts}
    return ClusteringResult(centers[used], remap[labels], diag)


def xmeans(data, k_range=range(1, 11), restarts: int = 10, rng=None) -> ClusteringResult:
    """K-means++ for every K in ``k_range``; keep the silhouette maximizer.

    K = 1 scores -1 (silhouette is undefined for one cluster). Ties go to
    the smaller K.
    """
    data = np.asarray(data, dtype=float)
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1 or ks[-1] > data.shape[0]:
        raise ValueError("k_range must be a non-empty subset of [1, N]")
    if rng is None:
        rng = np.random.default_rng(0)
    dist = pairwise_distances(data)
    best, best_score, scores = None, -np.inf, {}
    for k in ks:
        res = kmeanspp(data, k, restarts, rng)
        score = silhouette(data, res.labels, dist)
        scores[k] = score
        if score > best_score:
            best, best_score = res, score
    best.diagnostics["silhouette_by_K"] = scores
    best.diagnostics["silhouette_K1_convention"] = -1.0
    return best
