"""Covariance models and Mahalanobis norms.

Every covariance handled by the package is diagonal in some orthonormal
basis ``R`` shared by all points. Internally a dataset's covariances are
kept as an ``(N, d)`` array of eigenvalues plus that optional rotation, so
every algorithm can work coordinate-wise in the eigenbasis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

ORTHO_TOL = 1e-10


def _positive_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"{name} entries must be positive and finite")
    return arr


def check_orthogonal(R: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("rotation must be a square matrix")
    err = np.max(np.abs(R.T @ R - np.eye(R.shape[0])))
    if err > tol:
        raise ValueError(f"rotation is not orthogonal (max |R^T R - I| = {err:.3g})")
    return R


@dataclass(frozen=True)
class ScaledIdentity:
    sigma2: float

    def __post_init__(self):
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive and finite")

    rotation = None

    def eigenvalues(self, d: int) -> np.ndarray:
        return np.full(d, float(self.sigma2))

    def scaled(self, factor: float) -> "ScaledIdentity":
        return ScaledIdentity(self.sigma2 * factor)

    def matrix(self, d: int) -> np.ndarray:
        return self.sigma2 * np.eye(d)


@dataclass(frozen=True, eq=False)
class Diagonal:
    lambda2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lambda2", _positive_vector(self.lambda2, "lambda2"))

    rotation = None

    def eigenvalues(self, d: int) -> np.ndarray:
        if self.lambda2.size != d:
            raise ValueError(f"dimension mismatch: covariance has d={self.lambda2.size}, got {d}")
        return self.lambda2

    def scaled(self, factor: float) -> "Diagonal":
        return Diagonal(self.lambda2 * factor)

    def matrix(self, d: int) -> np.ndarray:
        return np.diag(self.eigenvalues(d))


@dataclass(frozen=True, eq=False)
class SharedEigenbasis:
    """S = R diag(delta) R^T."""

    R: np.ndarray
    delta: np.ndarray
    validate: bool = True

    def __post_init__(self):
        R = check_orthogonal(self.R) if self.validate else np.asarray(self.R, dtype=float)
        delta = _positive_vector(self.delta, "delta")
        if delta.size != R.shape[0]:
            raise ValueError("delta and R dimensions differ")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "delta", delta)

    @property
    def rotation(self) -> np.ndarray:
        return self.R

    def eigenvalues(self, d: int) -> np.ndarray:
        if self.delta.size != d:
            raise ValueError(f"dimension mismatch: covariance has d={self.delta.size}, got {d}")
        return self.delta

    def scaled(self, factor: float) -> "SharedEigenbasis":
        return SharedEigenbasis(self.R, self.delta * factor, validate=False)

    def matrix(self, d: int) -> np.ndarray:
        return (self.R * self.eigenvalues(d)) @ self.R.T


CovarianceModel = Union[ScaledIdentity, Diagonal, SharedEigenbasis]

KIND_SCALED = "scaled_identity"
KIND_DIAGONAL = "diagonal"
KIND_EIGEN = "shared_eigenbasis"


def kind_of(model: CovarianceModel) -> str:
    if isinstance(model, ScaledIdentity):
        return KIND_SCALED
    if isinstance(model, Diagonal):
        return KIND_DIAGONAL
    return KIND_EIGEN


def mahalanobis_sq(x, cov: CovarianceModel) -> float:
    """x^T S^-1 x."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a vector")
    if isinstance(cov, ScaledIdentity):
        return float(x @ x) / cov.sigma2
    lam = cov.eigenvalues(x.size)
    if cov.rotation is not None:
        x = cov.rotation.T @ x
    return float(np.sum(x * x / lam))


class DatasetCovariances:
    """Covariances of all N points, diagonal in one common basis.

    ``variances[n]`` holds the eigenvalues of point n's covariance and
    ``rotation`` the shared eigenvectors (``None`` means the canonical
    basis). ``kind`` records the structural class for round-tripping.
    """

    def __init__(self, variances, rotation=None, kind: str = KIND_DIAGONAL, shared: bool = False):
        var = np.asarray(variances, dtype=float)
        if var.ndim != 2 or var.shape[0] == 0:
            raise ValueError("variances must be an (N, d) array with N >= 1")
        if not np.all(np.isfinite(var)) or np.any(var <= 0.0):
            raise ValueError("variances must be positive and finite")
        if rotation is not None:
            rotation = check_orthogonal(rotation)
            if rotation.shape[0] != var.shape[1]:
                raise ValueError("rotation and variances dimensions differ")
        self.variances = var
        self.rotation = rotation
        self.kind = kind
        self.shared = shared
        self.inv_variances = 1.0 / var

    @property
    def n(self) -> int:
        return self.variances.shape[0]

    @property
    def d(self) -> int:
        return self.variances.shape[1]

    @classmethod
    def shared_model(cls, model: CovarianceModel, n: int, d: int) -> "DatasetCovariances":
        lam = model.eigenvalues(d)
        var = np.broadcast_to(lam, (n, d))
        return cls(var, model.rotation, kind_of(model), shared=True)

    @classmethod
    def per_point(cls, models: Sequence[CovarianceModel], d: int) -> "DatasetCovariances":
        if len(models) == 0:
            raise ValueError("need at least one covariance model")
        kinds = {kind_of(m) for m in models}
        rotations = [m.rotation for m in models if m.rotation is not None]
        if rotations and len(rotations) != len(models):
            raise ValueError("mixed eigenbases: some models are axis-aligned, others rotated")
        rotation = None
        if rotations:
            rotation = rotations[0]
            for other in rotations[1:]:
                if other is not rotation and np.max(np.abs(other - rotation)) > ORTHO_TOL:
                    raise ValueError("mixed eigenbases: per-point rotations differ")
        kind = kinds.pop() if len(kinds) == 1 else KIND_DIAGONAL
        var = np.stack([m.eigenvalues(d) for m in models])
        return cls(var, rotation, kind)

    def model(self, n: int) -> CovarianceModel:
        lam = self.variances[n]
        if self.rotation is not None:
            return SharedEigenbasis(self.rotation, lam, validate=False)
        if self.kind == KIND_SCALED:
            return ScaledIdentity(float(lam[0]))
        return Diagonal(lam)

    def models(self) -> list[CovarianceModel]:
        return [self.model(n) for n in range(self.n)]

    def to_eigenbasis(self, points: np.ndarray) -> np.ndarray:
        """Rows R^T y_n."""
        points = np.asarray(points, dtype=float)
        return points if self.rotation is None else points @ self.rotation

    def from_eigenbasis(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points if self.rotation is None else points @ self.rotation.T

    def mahalanobis_sq_rows(self, points: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """nu^2_{S_n}(y_n - phi) for every n, with y and phi in the original basis."""
        diff = self.to_eigenbasis(np.asarray(points) - np.asarray(phi))
        return np.einsum("ij,ij->i", diff * self.inv_variances, diff)

    def scaled(self, factor: float) -> "DatasetCovariances":
        return DatasetCovariances(self.variances * factor, self.rotation, self.kind, self.shared)

    def subset(self, index) -> "DatasetCovariances":
        return DatasetCovariances(self.variances[index], self.rotation, self.kind, self.shared)

    def diagonal_part(self) -> "DatasetCovariances":
        """Same eigenvalues, canonical basis: the covariances of R^T y_n."""
        kind = self.kind if self.kind != KIND_EIGEN else KIND_DIAGONAL
        return DatasetCovariances(self.variances, None, kind, self.shared)

    # JSON schema ---------------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == KIND_SCALED:
            s2 = self.variances[:, 0]
            return {"kind": KIND_SCALED, "sigma2": float(s2[0]) if self.shared else s2.tolist()}
        body = self.variances[0].tolist() if self.shared else self.variances.tolist()
        if self.rotation is None:
            return {"kind": KIND_DIAGONAL, "lambda2": body}
        return {"kind": KIND_EIGEN, "R": self.rotation.tolist(), "delta": body}

    @classmethod
    def from_dict(cls, spec: dict, n: int, d: int) -> "DatasetCovariances":
        kind = spec.get("kind")
        if kind == KIND_SCALED:
            s2 = np.asarray(spec["sigma2"], dtype=float)
            if s2.ndim == 0:
                return cls.shared_model(ScaledIdentity(float(s2)), n, d)
            if s2.shape != (n,):
                raise ValueError(f"sigma2 must be a scalar or a list of {n} values")
            return cls(np.repeat(s2[:, None], d, axis=1), None, KIND_SCALED)
        if kind in (KIND_DIAGONAL, KIND_EIGEN):
            key = "lambda2" if kind == KIND_DIAGONAL else "delta"
            body = np.asarray(spec[key], dtype=float)
            rotation = np.asarray(spec["R"], dtype=float) if kind == KIND_EIGEN else None
            shared = body.ndim == 1
            if shared:
                if body.shape != (d,):
                    raise ValueError(f"{key} must have {d} entries")
                body = np.broadcast_to(body, (n, d))
            elif body.shape != (n, d):
                raise ValueError(f"{key} must be a length-{d} vector or an {n}x{d} array")
            return cls(body, rotation, kind, shared=shared)
        raise ValueError(f"unknown covariance kind {kind!r}")


def mean_covariance(covs: DatasetCovariances) -> CovarianceModel:
    """Arithmetic mean of the covariances, kept in the same structural class."""
    if covs.n == 0:
        raise ValueError("cannot average an empty set of covariances")
    mean = covs.variances.mean(axis=0)
    if covs.rotation is not None:
        return SharedEigenbasis(covs.rotation, mean, validate=False)
    if covs.kind == KIND_SCALED:
        return ScaledIdentity(float(mean[0]))
    return Diagonal(mean)


def transform_to_eigenbasis(points, covs: DatasetCovariances):
    """Return (R^T y_n rows, diagonal covariances, R)."""
    R = covs.rotation if covs.rotation is not None else np.eye(covs.d)
    return covs.to_eigenbasis(points), covs.diagonal_part(), R
