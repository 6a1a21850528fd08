"""Generalized mean-shift map and its fixed-point iteration.

For covariances S_n = R D_n R^T the map

    g(phi) = (sum_n w_n S_n^-1)^-1 sum_n w_n S_n^-1 y_n,
    w_n = w(nu^2_{S_n}(y_n - phi)),

is evaluated in the eigenbasis, where it reduces to one weighted mean per
coordinate, then rotated back.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import DatasetCovariances, mean_covariance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IterationConfig:
    epsilon_e: float = 1e-3
    max_iters: int = 100
    use_init_heuristic: bool = True
    track_cost: bool = True

    def __post_init__(self):
        if not self.epsilon_e > 0:
            raise ValueError("epsilon_e must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 2:
            raise ValueError("max_iters must be an integer >= 2")


@dataclass
class FixedPointTrace:
    iterates: list[np.ndarray] = field(default_factory=list)
    cost_values: list[float] = field(default_factory=list)
    stop_reason: str = ""
    boosted_first_step: bool = False
    fallback_steps: int = 0

    @property
    def n_iter(self) -> int:
        return max(len(self.iterates) - 1, 0)

    def summary(self) -> dict:
        return {
            "n_iter": self.n_iter,
            "stop_reason": self.stop_reason,
            "fallback_steps": self.fallback_steps,
        }


class Problem:
    """Data and covariances pre-rotated into the shared eigenbasis.

    Built once per dataset and reused by every fixed-point search.
    """

    def __init__(self, data, covs: DatasetCovariances):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise ValueError("data must be an (N, d) array")
        if data.shape != (covs.n, covs.d):
            raise ValueError(f"data shape {data.shape} does not match covariances ({covs.n}, {covs.d})")
        if not np.all(np.isfinite(data)):
            raise ValueError("data must be finite")
        self.data = data
        self.covs = covs
        self.z = covs.to_eigenbasis(data)
        self.inv = covs.inv_variances
        self.z_inv = self.z * self.inv
        self.q_inv = 1.0 / mean_covariance(covs).eigenvalues(covs.d)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def sq_dist(self, xi: np.ndarray, inv: np.ndarray | None = None) -> np.ndarray:
        diff = self.z - xi
        return np.einsum("ij,ij->i", diff * (self.inv if inv is None else inv), diff)

    def q_norm(self, dxi: np.ndarray) -> float:
        return float(np.sqrt(np.sum(dxi * dxi * self.q_inv)))

    def nearest(self, xi: np.ndarray) -> np.ndarray:
        diff = self.z - xi
        return self.z[int(np.argmin(np.einsum("ij,ij->i", diff * self.q_inv, diff)))].copy()

    def step(self, xi: np.ndarray, kernel, inv: np.ndarray | None = None, t: np.ndarray | None = None):
        """One application of the map in eigen-coordinates.

        Returns (new xi, used_fallback).
        """
        inv = self.inv if inv is None else inv
        if t is None:
            t = self.sq_dist(xi, inv)
        w = np.asarray(kernel(t), dtype=float)
        if np.all(w <= kernel.floor):
            # every weight underflowed: jump to the closest data point
            return self.nearest(xi), True
        z_inv = self.z_inv if inv is self.inv else self.z * inv
        num = w @ z_inv
        den = w @ inv
        return num / den, False

    def cost(self, xi: np.ndarray, kernel, t: np.ndarray | None = None) -> float:
        if t is None:
            t = self.sq_dist(xi)
        return float(np.sum(kernel.antiderivative(t)))

    def to_original(self, xi: np.ndarray) -> np.ndarray:
        return self.covs.from_eigenbasis(xi)

    def to_eigen(self, phi: np.ndarray) -> np.ndarray:
        return self.covs.to_eigenbasis(np.asarray(phi, dtype=float))


def mean_shift_map(phi, data, covs: DatasetCovariances, kernel) -> np.ndarray:
    """Evaluate the generalized mean-shift map at ``phi``."""
    prob = Problem(data, covs)
    xi, _ = prob.step(prob.to_eigen(phi), kernel)
    return prob.to_original(xi)


def mean_shift_map_classic(phi, data, h: float, kernel) -> np.ndarray:
    """Classic mean shift: weights w(|y_n - phi|^2 / h^2), plain weighted mean."""
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    data = np.asarray(data, dtype=float)
    phi = np.asarray(phi, dtype=float)
    diff = data - phi
    w = np.asarray(kernel(np.einsum("ij,ij->i", diff, diff) / h**2), dtype=float)
    if np.all(w <= kernel.floor):
        return data[int(np.argmin(np.einsum("ij,ij->i", diff, diff)))].copy()
    return (w @ data) / np.sum(w)


def iterate_to_fixed_point(
    init,
    data,
    covs: DatasetCovariances,
    kernel,
    cfg: IterationConfig = IterationConfig(),
    init_cov_boost=None,
    problem: Problem | None = None,
) -> tuple[np.ndarray, FixedPointTrace]:
    """Iterate phi <- g(phi) from ``init``.

    The first step optionally uses the map with every covariance inflated
    by ``init_cov_boost`` (the initializer's own covariance). Stops when
    nu_Q(phi_next - phi) / d <= epsilon_e, Q being the mean covariance, or
    after ``cfg.max_iters`` map evaluations. Returns the last iterate.
    """
    prob = problem if problem is not None else Problem(data, covs)
    trace = FixedPointTrace()
    xi = prob.to_eigen(init)
    d = prob.d

    boost_inv = None
    if init_cov_boost is not None and cfg.use_init_heuristic:
        extra = init_cov_boost.eigenvalues(d)
        if init_cov_boost.rotation is not None and prob.covs.rotation is not None:
            if np.max(np.abs(init_cov_boost.rotation - prob.covs.rotation)) > 1e-10:
                raise ValueError("boost covariance must share the dataset eigenbasis")
        elif (init_cov_boost.rotation is None) != (prob.covs.rotation is None):
            raise ValueError("boost covariance must share the dataset eigenbasis")
        boost_inv = 1.0 / (prob.covs.variances + extra)
        trace.boosted_first_step = True

    trace.iterates.append(prob.to_original(xi))
    t = prob.sq_dist(xi)
    if cfg.track_cost:
        trace.cost_values.append(prob.cost(xi, kernel, t))

    for ell in range(cfg.max_iters):
        if ell == 0 and boost_inv is not None:
            new, fb = prob.step(xi, kernel, inv=boost_inv)
        else:
            new, fb = prob.step(xi, kernel, t=t)
        trace.fallback_steps += fb
        moved = prob.q_norm(new - xi) / d
        xi = new
        trace.iterates.append(prob.to_original(xi))
        t = prob.sq_dist(xi)
        if cfg.track_cost:
            trace.cost_values.append(prob.cost(xi, kernel, t))
        if moved <= cfg.epsilon_e:
            trace.stop_reason = "converged"
            break
    else:
        trace.stop_reason = "max_iters"
    if trace.fallback_steps:
        log.debug("fixed-point search used %d underflow fallback steps", trace.fallback_steps)
    return trace.iterates[-1], trace


def cost_J(thetas, data, covs: DatasetCovariances, kernel) -> float:
    """sum_k sum_n R(nu^2_{S_n}(y_n - theta_k)) with R' = w and R(0) = 0."""
    if not callable(getattr(kernel, "antiderivative", None)):
        raise TypeError(f"kernel {type(kernel).__name__} has no antiderivative; cost is unsupported")
    prob = Problem(data, covs)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    return float(sum(prob.cost(prob.to_eigen(th), kernel) for th in thetas))
