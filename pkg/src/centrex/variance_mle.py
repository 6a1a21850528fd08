"""Maximum-likelihood scale for covariances of the form sigma^2 C.

The statistic is the smallest squared C-Mahalanobis distance among P
randomly chosen points. Assuming M of those pairs come from a common
cluster, each such squared distance divided by 2 sigma^2 is chi2_d, and the
minimum of M of them has the density maximized here over sigma.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import specfun
from .geometry import CovarianceModel, DatasetCovariances, ScaledIdentity

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class BoundaryWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class MleConfig:
    P: int = 50
    M: int | None = None  # defaults to P
    base_cov: CovarianceModel = ScaledIdentity(1.0)
    t_lo: float | None = None
    t_hi: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.P < 2:
            raise ValueError("P must be at least 2")
        m = self.P if self.M is None else self.M
        if not 1 <= m <= self.P * (self.P - 1) // 2:
            raise ValueError("M must lie in [1, P(P-1)/2]")
        object.__setattr__(self, "M", int(m))
        if self.t_lo is not None and self.t_hi is not None and not 0 < self.t_lo < self.t_hi:
            raise ValueError("need 0 < t_lo < t_hi")


@dataclass(frozen=True)
class SigmaEstimate:
    sigma: float
    upsilon: float
    P: int
    M: int

    def to_dict(self) -> dict:
        return {"sigma_mle": self.sigma, "upsilon": self.upsilon, "P": self.P, "M": self.M}


def min_pairwise_stat(data, C: CovarianceModel, P: int, rng: np.random.Generator) -> float:
    """min over pairs of P distinct random points of nu^2_C(y_p - y_p')."""
    data = np.asarray(data, dtype=float)
    n, d = data.shape
    if P > n:
        raise ValueError(f"P={P} exceeds the number of points N={n}")
    if P < 2:
        raise ValueError("P must be at least 2")
    idx = rng.choice(n, size=P, replace=False)
    sample = data[idx]
    lam = C.eigenvalues(d)
    if C.rotation is not None:
        sample = sample @ C.rotation
    scaled = sample / np.sqrt(lam)
    diff = scaled[:, None, :] - scaled[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return float(sq[np.triu_indices(P, k=1)].min())


def log_likelihood(upsilon: float, t, d: int, M: int):
    """log f(upsilon, t), f being the density of the minimum at scale t."""
    t = np.asarray(t, dtype=float)
    u = upsilon / (2.0 * t * t)
    out = (
        math.log(M)
        - math.log(2.0)
        - 2.0 * np.log(t)
        + specfun.chi2_logpdf(d, u)
        + (M - 1) * specfun.chi2_log_survival(d, u)
    )
    return out


def mle_sigma(upsilon: float, d: int, M: int, t_lo: float | None = None, t_hi: float | None = None) -> float:
    """Maximize the likelihood of the minimum statistic over the scale.

    Golden-section search on log t; the default bracket is [1e-3, 1e3]
    around the M = 1 closed form sqrt(upsilon / 2d).
    """
    if not upsilon > 0:
        raise ValueError("upsilon must be positive")
    if M < 1:
        raise ValueError("M must be at least 1")
    centre = math.sqrt(upsilon / (2.0 * d))
    lo = math.log(t_lo if t_lo is not None else 1e-3 * centre)
    hi = math.log(t_hi if t_hi is not None else 1e3 * centre)
    if not lo < hi:
        raise ValueError("need t_lo < t_hi")

    def f(s: float) -> float:
        return float(log_likelihood(upsilon, math.exp(s), d, M))

    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    e = a + GOLDEN * (b - a)
    fc, fe = f(c), f(e)
    while b - a > 1e-10:
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + GOLDEN * (b - a)
            fe = f(e)
    s = 0.5 * (a + b)
    if s - lo < 1e-6 or hi - s < 1e-6:
        warnings.warn("likelihood maximizer sits on the search boundary", BoundaryWarning, stacklevel=2)
    return math.exp(s)


def estimate_sigma(data, cfg: MleConfig = MleConfig(), rng: np.random.Generator | None = None) -> SigmaEstimate:
    data = np.asarray(data, dtype=float)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    ups = min_pairwise_stat(data, cfg.base_cov, cfg.P, rng)
    sigma = mle_sigma(ups, data.shape[1], cfg.M, cfg.t_lo, cfg.t_hi)
    return SigmaEstimate(sigma, ups, cfg.P, cfg.M)


def estimate_covariances_mle(data, cfg: MleConfig = MleConfig(), rng: np.random.Generator | None = None):
    """Shared covariances sigma_mle^2 C; returns (covariances, estimate)."""
    data = np.asarray(data, dtype=float)
    est = estimate_sigma(data, cfg, rng)
    model = cfg.base_cov.scaled(est.sigma**2)
    return DatasetCovariances.shared_model(model, data.shape[0], data.shape[1]), est
