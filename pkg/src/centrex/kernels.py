"""Kernels w: [0, inf) -> (0, inf) applied to squared Mahalanobis distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import specfun

TINY = np.finfo(float).tiny
FLAT_FLOOR = 1e-30
UNDERFLOW_BAND = 1e3 * TINY


def _check_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t < 0.0):
        raise ValueError("kernel argument must be finite and non-negative")
    return t


def _out(values: np.ndarray, like):
    return float(values) if np.ndim(like) == 0 else values


@dataclass(frozen=True)
class WaldKernel:
    """p-value of the Wald test for a d-dimensional Gaussian mean.

    w(t) = 1 - F_chi2_d(t). Underflowed tail values are lifted to the
    smallest normal double so the kernel stays strictly positive.
    """

    d: int
    floor: float = field(default=TINY, repr=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("Wald kernel needs a positive integer dimension")

    def __call__(self, t):
        t = _check_t(t)
        w = np.maximum(specfun.chi2_survival(self.d, np.atleast_1d(t)), self.floor)
        return _out(w if np.ndim(t) else w[0], t)

    def antiderivative(self, t):
        # int_0^t Q(d/2, s/2) ds = t Q(d/2, t/2) + d P(d/2 + 1, t/2)
        t = _check_t(t)
        tt = np.atleast_1d(t)
        half = self.d / 2.0
        r = tt * specfun.regularized_upper_gamma(half, tt / 2.0) + self.d * specfun.regularized_lower_gamma(
            half + 1.0, tt / 2.0
        )
        return _out(r if np.ndim(t) else r[0], t)

    def spec(self) -> str:
        return "wald"


@dataclass(frozen=True)
class GaussianKernel:
    """Gaussian weights.

    ``form="squared"`` gives exp(-t^2 / (2 c sigma^2)), the variant used in
    the d = 100 benchmarks; ``form="linear"`` gives exp(-t / (2 h)) with
    bandwidth h = c sigma^2.
    """

    c: float = 5.0
    sigma: float = 1.0
    form: str = "squared"
    floor: float = field(default=TINY, repr=False)

    def __post_init__(self):
        if self.c <= 0 or self.sigma <= 0:
            raise ValueError("Gaussian kernel parameters must be positive")
        if self.form not in ("squared", "linear"):
            raise ValueError("form must be 'squared' or 'linear'")

    @property
    def scale(self) -> float:
        return self.c * self.sigma**2

    def __call__(self, t):
        t = _check_t(t)
        if self.form == "squared":
            w = np.exp(-(t * t) / (2.0 * self.scale))
        else:
            w = np.exp(-t / (2.0 * self.scale))
        return _out(np.maximum(w, self.floor), t)

    def antiderivative(self, t):
        t = _check_t(t)
        s = self.scale
        if self.form == "linear":
            r = 2.0 * s * (1.0 - np.exp(-t / (2.0 * s)))
        else:
            r = math.sqrt(math.pi * s / 2.0) * np.vectorize(math.erf, otypes=[float])(t / math.sqrt(2.0 * s))
        return _out(np.asarray(r, dtype=float), t)

    def spec(self) -> str:
        return f"gauss:c={self.c!r},sigma={self.sigma!r},form={self.form}"


@dataclass(frozen=True)
class FlatKernel:
    """1 on [0, h^2], a tiny positive floor beyond."""

    h: float
    floor: float = FLAT_FLOOR

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("flat kernel bandwidth must be positive")

    def __call__(self, t):
        t = _check_t(t)
        return _out(np.where(t <= self.h**2, 1.0, self.floor), t)

    def antiderivative(self, t):
        t = _check_t(t)
        h2 = self.h**2
        return _out(np.minimum(t, h2) + self.floor * np.maximum(t - h2, 0.0), t)

    def spec(self) -> str:
        return f"flat:h={self.h!r}"


Kernel = WaldKernel | GaussianKernel | FlatKernel


def parse_kernel(spec: str, d: int, sigma: float | None = None) -> Kernel:
    """Build a kernel from "wald", "gauss:c=5,sigma=2" or "flat:h=1".

    A Gaussian kernel without an explicit sigma falls back to ``sigma``, and
    a flat kernel without h falls back to ``sigma`` too.
    """
    name, _, rest = spec.partition(":")
    params: dict[str, str] = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"bad kernel parameter {item!r}")
            params[key.strip()] = value.strip()
    name = name.strip().lower()
    if name == "wald":
        return WaldKernel(d)
    if name in ("gauss", "gaussian"):
        sig = float(params.get("sigma", sigma if sigma is not None else 1.0))
        return GaussianKernel(c=float(params.get("c", 5.0)), sigma=sig, form=params.get("form", "squared"))
    if name == "flat":
        if "h" not in params and sigma is None:
            raise ValueError("flat kernel needs h")
        return FlatKernel(float(params.get("h", sigma)))
    raise ValueError(f"unknown kernel {spec!r}")


@dataclass
class KernelReport:
    positive: bool
    non_increasing: bool
    tail_vanishes: bool
    tail_ratio: float
    knee: float

    @property
    def ok(self) -> bool:
        return self.positive and self.non_increasing and self.tail_vanishes


def verify_kernel_assumptions(kernel: Kernel, grid, tail_tol: float = 1e-6) -> KernelReport:
    """Check positivity, monotonicity and t w(t) -> 0 on a sorted grid.

    The tail check requires t w(t) to be non-increasing from its maximum
    (the knee) on, and to end below ``tail_tol`` times that maximum. Values
    within a few orders of magnitude of the smallest normal double count as
    underflowed and are skipped; a deliberate floor such as the flat
    kernel's is far above that and does get checked.
    """
    t = np.asarray(grid, dtype=float)
    if np.any(np.diff(t) < 0):
        raise ValueError("grid must be sorted ascending")
    w = np.asarray(kernel(t), dtype=float)
    tw = t * w
    k = int(np.argmax(tw))
    peak = tw[k]
    after = tw[k:]
    live = w[k:] > UNDERFLOW_BAND
    steps = np.diff(after)[live[1:]]
    decreasing_tail = bool(np.all(steps <= 1e-12 * after[:-1][live[1:]]))
    ratio = float(after[-1] / peak) if peak > 0 else 0.0
    return KernelReport(
        positive=bool(np.all(w > 0.0)),
        non_increasing=bool(np.all(np.diff(w) <= 0.0)),
        tail_vanishes=decreasing_tail and ratio <= tail_tol,
        tail_ratio=ratio,
        knee=float(t[k]),
    )
