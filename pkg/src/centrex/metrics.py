"""Clustering evaluation: pairwise error rate, silhouette, K recovery."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


def error_rate(true_labels, pred_labels) -> float:
    """Fraction of point pairs on which the two co-membership relations disagree."""
    a = np.asarray(true_labels)
    b = np.asarray(pred_labels)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label vectors must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two points")
    iu = np.triu_indices(n, k=1)
    same_a = (a[:, None] == a[None, :])[iu]
    same_b = (b[:, None] == b[None, :])[iu]
    return float(np.count_nonzero(same_a != same_b)) * 2.0 / (n * (n - 1))


def pairwise_distances(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def silhouette(data, labels, distances: np.ndarray | None = None) -> float:
    """Mean silhouette coefficient with Euclidean distances.

    Points alone in their cluster score 0. A single cluster scores -1 by
    convention, so any split beats it during model selection.
    """
    labels = np.asarray(labels)
    uniq, lab = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        return -1.0
    dist = pairwise_distances(data) if distances is None else distances
    n = lab.size
    k = uniq.size
    onehot = np.zeros((n, k))
    onehot[np.arange(n), lab] = 1.0
    sums = dist @ onehot  # sums[i, c] = sum of distances from i to cluster c
    counts = onehot.sum(axis=0)
    own = counts[lab]
    a = sums[np.arange(n), lab] / np.maximum(own - 1.0, 1.0)
    other = sums / counts
    other[np.arange(n), lab] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own == 1] = 0.0
    return float(np.clip(s, -1.0, 1.0).mean())


@dataclass
class EvalReport:
    error_rate: float
    silhouette: float
    K_true: int
    K_hat: int

    @property
    def correct_K(self) -> bool:
        return self.K_true == self.K_hat

    def to_dict(self) -> dict:
        out = asdict(self)
        out["correct_K"] = self.correct_K
        return out


def evaluate(true_labels, result, data) -> EvalReport:
    """Score a clustering result (after empty clusters were removed) against truth."""
    true_labels = np.asarray(getattr(true_labels, "labels", true_labels))
    return EvalReport(
        error_rate=error_rate(true_labels, result.labels),
        silhouette=silhouette(data, result.labels),
        K_true=int(np.unique(true_labels).size),
        K_hat=int(result.K_hat),
    )
