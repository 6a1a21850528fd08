"""Synthetic heteroscedastic Gaussian benchmarks and CSV datasets."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import KIND_DIAGONAL, DatasetCovariances, ScaledIdentity

SCENARIOS = ("fixed", "uniform_diagonal", "bimodal")
MAX_REDRAWS = 1_000_000


class InfeasibleScenario(RuntimeError):
    pass


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Benchmark scenario.

    ``fixed`` uses sigma^2 I for every point (``sigma_min == sigma_max``);
    ``uniform_diagonal`` draws each per-point standard deviation uniformly in
    [sigma_min, sigma_max]; ``bimodal`` gives each cluster either the low
    interval [sigma_min, sigma_min + 1] or the high one [sigma_max - 1,
    sigma_max] by a fair coin.
    """

    kind: str = "fixed"
    sigma_min: float = 5.0
    sigma_max: float | None = None
    d: int = 100
    n: int = 400
    k_range: tuple[int, int] = (2, 10)
    A: float = 20.0
    mu_min: float = 200.0

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.kind!r}; expected one of {SCENARIOS}")
        if self.sigma_max is None:
            smax = self.sigma_min if self.kind == "fixed" else self.sigma_min + 4.0
            object.__setattr__(self, "sigma_max", float(smax))
        object.__setattr__(self, "k_range", tuple(int(k) for k in self.k_range))
        if self.sigma_min < 0 or self.sigma_max < self.sigma_min:
            raise ValueError("need 0 <= sigma_min <= sigma_max")
        if self.kind == "fixed" and self.sigma_max != self.sigma_min:
            raise ValueError("fixed scenario needs sigma_min == sigma_max")
        if self.kind == "bimodal" and self.sigma_max - self.sigma_min < 1.0:
            raise ValueError("bimodal scenario needs sigma_max >= sigma_min + 1")
        lo, hi = self.k_range
        if not 1 <= lo <= hi <= self.n:
            raise ValueError("k_range must satisfy 1 <= lo <= hi <= n")
        if self.mu_min <= 0 or self.A <= 0 or self.d < 1:
            raise ValueError("mu_min, A and d must be positive")

    @property
    def sigma_mean(self) -> float:
        return 0.5 * (self.sigma_min + self.sigma_max)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["k_range"] = list(self.k_range)
        return out


@dataclass
class GroundTruth:
    centroids: np.ndarray
    labels: np.ndarray
    covariances: DatasetCovariances
    sigmas: np.ndarray | None = None  # (N, d) standard deviations, when drawn per point
    interval_mid: np.ndarray | None = None  # (N,) middle of the interval used per point
    scenario: Scenario | None = None

    @property
    def K(self) -> int:
        return int(self.centroids.shape[0])

    def to_dict(self) -> dict:
        out = {
            "K": self.K,
            "centroids": self.centroids.tolist(),
            "labels": self.labels.tolist(),
            "covariances": self.covariances.to_dict(),
        }
        if self.interval_mid is not None:
            out["interval_mid"] = self.interval_mid.tolist()
        if self.scenario is not None:
            out["scenario"] = self.scenario.to_dict()
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "GroundTruth":
        labels = np.asarray(obj["labels"], dtype=int)
        centroids = np.asarray(obj["centroids"], dtype=float)
        n, d = labels.size, centroids.shape[1]
        scen = obj.get("scenario")
        scenario = None
        if scen is not None:
            scen = dict(scen)
            scen["k_range"] = tuple(scen["k_range"])
            scenario = Scenario(**scen)
        covs = DatasetCovariances.from_dict(obj["covariances"], n, d) if "covariances" in obj else None
        mid = np.asarray(obj["interval_mid"], dtype=float) if "interval_mid" in obj else None
        return cls(centroids, labels, covs, interval_mid=mid, scenario=scenario)


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    covariances: DatasetCovariances | None = None
    columns: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _min_pairwise_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return np.inf
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return float(dist[np.triu_indices(len(points), k=1)].min())


def verify_truth(truth: GroundTruth, mu_min: float) -> None:
    if np.unique(truth.labels).size != truth.K:
        raise AssertionError("ground-truth labels are not surjective")
    if _min_pairwise_distance(truth.centroids) <= mu_min:
        raise AssertionError("ground-truth centroids closer than mu_min")


def generate(scenario: Scenario, rng: np.random.Generator) -> tuple[np.ndarray, GroundTruth]:
    """Draw one benchmark data set.

    K is uniform on ``k_range``; the K centroids are redrawn together from
    N(0, A^2 I) until every pairwise distance exceeds ``mu_min``; labels are
    uniform on the clusters and redrawn until every cluster is non-empty.
    """
    s = scenario
    lo, hi = s.k_range
    K = int(rng.integers(lo, hi + 1))
    for _ in range(MAX_REDRAWS):
        centroids = rng.normal(0.0, s.A, size=(K, s.d))
        if _min_pairwise_distance(centroids) > s.mu_min:
            break
    else:
        raise InfeasibleScenario(f"no centroid draw with min distance > {s.mu_min} after {MAX_REDRAWS} tries")
    while True:
        labels = rng.integers(0, K, size=s.n)
        if np.unique(labels).size == K:
            break

    interval_mid = None
    if s.kind == "fixed":
        sigmas = np.full((s.n, s.d), float(s.sigma_min))
    elif s.kind == "uniform_diagonal":
        sigmas = rng.uniform(s.sigma_min, s.sigma_max, size=(s.n, s.d))
    else:
        coin = rng.integers(0, 2, size=K)
        lows = np.where(coin[labels] == 0, s.sigma_min, s.sigma_max - 1.0)
        sigmas = lows[:, None] + rng.uniform(0.0, 1.0, size=(s.n, s.d))
        interval_mid = lows + 0.5

    points = centroids[labels] + sigmas * rng.standard_normal((s.n, s.d))
    if s.kind == "fixed":
        covs = (
            DatasetCovariances.shared_model(ScaledIdentity(float(s.sigma_min) ** 2), s.n, s.d)
            if s.sigma_min > 0
            else None
        )
    else:
        covs = DatasetCovariances(sigmas**2, None, KIND_DIAGONAL)
    truth = GroundTruth(centroids, labels, covs, sigmas, interval_mid, s)
    verify_truth(truth, s.mu_min)
    return points, truth


# CSV -----------------------------------------------------------------------


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_csv(text: str, label_column: str | int | None = None, source: str = "<csv>") -> Dataset:
    """Parse numeric CSV text, one point per row.

    A first row containing any non-numeric cell is taken as a header. With a
    header, a column named ``label`` (or ``class``) is used for labels
    unless ``label_column`` says otherwise.
    """
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(io.StringIO(text))) if any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{source}: empty dataset")
    header: list[str] = []
    if not all(_is_number(c) for c in rows[0][1]):
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise DataFormatError(f"{source}: empty dataset (header only)")
    width = len(rows[0][1])
    if header and len(header) != width:
        raise DataFormatError(f"{source}: header has {len(header)} columns, data has {width}")

    label_idx = None
    if isinstance(label_column, int):
        label_idx = label_column if label_column >= 0 else width + label_column
    elif isinstance(label_column, str):
        if label_column not in header:
            raise DataFormatError(f"{source}: no column named {label_column!r}")
        label_idx = header.index(label_column)
    elif header:
        for name in ("label", "class"):
            if name in header:
                label_idx = header.index(name)
                break

    values = []
    labels = []
    for lineno, row in rows:
        if len(row) != width:
            raise DataFormatError(f"{source}:{lineno}: expected {width} columns, found {len(row)}")
        try:
            nums = [float(c) for j, c in enumerate(row) if j != label_idx]
        except ValueError as exc:
            raise DataFormatError(f"{source}:{lineno}: {exc}") from None
        values.append(nums)
        if label_idx is not None:
            labels.append(row[label_idx].strip())
    points = np.asarray(values, dtype=float)
    if points.shape[1] == 0:
        raise DataFormatError(f"{source}: no coordinate columns")
    if not np.all(np.isfinite(points)):
        raise DataFormatError(f"{source}: non-finite values")
    lab = None
    if label_idx is not None:
        _, lab = np.unique(np.asarray(labels), return_inverse=True)
    cols = [c for j, c in enumerate(header) if j != label_idx] if header else []
    return Dataset(points, lab, None, cols)


def load_csv(path, covariance_spec: dict | None = None, label_column: str | int | None = None) -> Dataset:
    path = Path(path)
    ds = parse_csv(path.read_text(), label_column, str(path))
    if covariance_spec is not None:
        ds.covariances = DatasetCovariances.from_dict(covariance_spec, ds.n, ds.d)
    return ds


def write_csv(path, points: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(points.shape[1])])
        for row in points:
            w.writerow([repr(float(v)) for v in row])


def load_ruspini() -> Dataset:
    """The 75-point, 4-group Ruspini data (bundled)."""
    text = resources.files("centrex").joinpath("data/ruspini.csv").read_text()
    return parse_csv(text, source="ruspini.csv")
