"""Regularized incomplete gamma and chi-squared distribution functions.

Everything here works on numpy arrays in ``x``/``t`` with a scalar shape
parameter, which is all the clustering code needs (the degrees of freedom
is the data dimension).
"""

from __future__ import annotations

import math

import numpy as np

EPS = 1e-16
CF_EPS = 4 * np.finfo(float).eps
FPMIN = 1e-300
MAX_TERMS = 100_000


def _check_shape(a: float) -> float:
    a = float(a)
    if not math.isfinite(a) or a <= 0.0:
        raise ValueError(f"shape parameter must be a positive finite real, got {a!r}")
    return a


def _check_arg(x, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    if np.any(x < 0.0):
        raise ValueError(f"{name} must be non-negative")
    return x


def _log_prefactor(a: float, x: np.ndarray) -> np.ndarray:
    # log(x^a e^-x / Gamma(a)); x == 0 handled by callers
    with np.errstate(divide="ignore"):
        return a * np.log(x) - x - math.lgamma(a)


def _series(a: float, x: np.ndarray) -> np.ndarray:
    """Sum of x^k / ((a+1)...(a+k)), the series part of P(a, x)."""
    term = np.full_like(x, 1.0 / a)
    total = term.copy()
    ap = a
    for _ in range(MAX_TERMS):
        ap += 1.0
        term = term * x / ap
        total += term
        if np.all(np.abs(term) < np.abs(total) * EPS):
            return total
    raise ArithmeticError("incomplete gamma series failed to converge")


def _continued_fraction(a: float, x: np.ndarray) -> np.ndarray:
    """Modified Lentz evaluation of the continued fraction for Q(a, x)."""
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / FPMIN)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, MAX_TERMS):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < FPMIN, FPMIN, d)
        c = b + an / c
        c = np.where(np.abs(c) < FPMIN, FPMIN, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < CF_EPS):
            return h
    raise ArithmeticError("incomplete gamma continued fraction failed to converge")


def _log_gamma_pair(a: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (log P(a,x), log Q(a,x)).

    Each is computed directly on its own side of the x = a + 1 split and the
    other one by complement, so the small tail keeps its relative precision.
    """
    log_p = np.empty_like(x)
    log_q = np.empty_like(x)
    zero = x == 0.0
    low = (x < a + 1.0) & ~zero
    high = x >= a + 1.0

    log_p[zero] = -np.inf
    log_q[zero] = 0.0
    if np.any(low):
        xl = x[low]
        lp = _log_prefactor(a, xl) + np.log(_series(a, xl))
        log_p[low] = lp
        log_q[low] = np.log1p(-np.exp(lp))
    if np.any(high):
        xh = x[high]
        lq = _log_prefactor(a, xh) + np.log(_continued_fraction(a, xh))
        log_q[high] = lq
        log_p[high] = np.log1p(-np.exp(lq))
    return log_p, log_q


def _unwrap(values: np.ndarray, like):
    return values.item() if np.ndim(like) == 0 else values


def regularized_lower_gamma(a: float, x):
    """P(a, x) = gamma(a, x) / Gamma(a)."""
    a = _check_shape(a)
    xs = _check_arg(x)
    log_p, _ = _log_gamma_pair(a, np.atleast_1d(xs))
    return _unwrap(np.exp(log_p), xs)


def regularized_upper_gamma(a: float, x):
    """Q(a, x) = Gamma(a, x) / Gamma(a).

    Values in the far tail are returned as tiny positive numbers, reaching
    zero only when they fall below the smallest subnormal double.
    """
    a = _check_shape(a)
    xs = _check_arg(x)
    _, log_q = _log_gamma_pair(a, np.atleast_1d(xs))
    return _unwrap(np.exp(log_q), xs)


def log_regularized_upper_gamma(a: float, x):
    """log Q(a, x), finite far beyond the point where Q itself underflows."""
    a = _check_shape(a)
    xs = _check_arg(x)
    _, log_q = _log_gamma_pair(a, np.atleast_1d(xs))
    return _unwrap(log_q, xs)


def _check_dof(d) -> int:
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {d!r}")
    return int(d)


def chi2_cdf(d: int, t):
    d = _check_dof(d)
    return regularized_lower_gamma(d / 2.0, _check_arg(t, "t") / 2.0)


def chi2_survival(d: int, t):
    """1 - F(t), computed directly from the upper incomplete gamma."""
    d = _check_dof(d)
    return regularized_upper_gamma(d / 2.0, _check_arg(t, "t") / 2.0)


def chi2_log_survival(d: int, t):
    d = _check_dof(d)
    return log_regularized_upper_gamma(d / 2.0, _check_arg(t, "t") / 2.0)


def chi2_logpdf(d: int, t):
    """Log density of the chi-squared law; -inf at t = 0 for d > 2."""
    d = _check_dof(d)
    t = _check_arg(t, "t")
    half = d / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if d == 2:
            out = -t / 2.0 - math.log(2.0)
        else:
            out = (half - 1.0) * np.log(t) - t / 2.0 - half * math.log(2.0) - math.lgamma(half)
    if d == 1:
        out = np.where(t == 0.0, np.inf, out)
    return out.item() if np.ndim(out) == 0 else out


def chi2_quantile(d: int, p: float, tol: float = 1e-13) -> float:
    """Inverse of :func:`chi2_cdf` for 0 <= p < 1.

    Safeguarded Newton: each Newton step that leaves the current bracket is
    replaced by a bisection step, so convergence is guaranteed.
    """
    d = _check_dof(d)
    p = float(p)
    if not (0.0 <= p < 1.0) or math.isnan(p):
        raise ValueError(f"p must lie in [0, 1), got {p!r}")
    if p == 0.0:
        return 0.0

    upper_tail = p > 0.5
    target = 1.0 - p if upper_tail else p

    def residual(t: float) -> float:
        # increasing in t on both branches
        if upper_tail:
            return target - chi2_survival(d, t)
        return chi2_cdf(d, t) - target

    lo, hi = 0.0, d + 40.0 * math.sqrt(2.0 * d)
    while residual(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
    t = 0.5 * (lo + hi)
    for _ in range(500):
        r = residual(t)
        if r == 0.0:
            return t
        if r < 0.0:
            lo = t
        else:
            hi = t
        if abs(r) <= tol * max(target, 1e-300) or hi - lo <= 4 * np.finfo(float).eps * hi:
            return t
        dens = math.exp(chi2_logpdf(d, t)) if t > 0.0 else 0.0
        step = t - r / dens if dens > 0.0 and math.isfinite(dens) else math.nan
        t = step if lo < step < hi else 0.5 * (lo + hi)
    return t
