"""Clustering heteroscedastic Gaussian data by kernel fixed points.

Typical use::

    from centrex import centrex, CentrexConfig, DatasetCovariances, ScaledIdentity
    covs = DatasetCovariances.shared_model(ScaledIdentity(25.0), *data.shape)
    result = centrex(data, covs, CentrexConfig(epsilon_f=1.0))
"""

from .algorithm import CentrexConfig, ClusteringResult, assign, centrex, estimate_centroids, fuse, wald_test, wald_threshold
from .baselines import kmeanspp, meanshift_cluster, xmeans
from .geometry import DatasetCovariances, Diagonal, ScaledIdentity, SharedEigenbasis, mahalanobis_sq
from .kernels import FlatKernel, GaussianKernel, WaldKernel, parse_kernel, verify_kernel_assumptions
from .meanshift import IterationConfig, cost_J, iterate_to_fixed_point, mean_shift_map, mean_shift_map_classic
from .metrics import EvalReport, error_rate, evaluate, silhouette
from .synthdata import GroundTruth, Scenario, generate, load_csv, load_ruspini
from .variance_mle import MleConfig, estimate_covariances_mle, estimate_sigma, mle_sigma, min_pairwise_stat

__version__ = "0.1.0"

__all__ = [
    "CentrexConfig",
    "ClusteringResult",
    "DatasetCovariances",
    "Diagonal",
    "EvalReport",
    "FlatKernel",
    "GaussianKernel",
    "GroundTruth",
    "IterationConfig",
    "MleConfig",
    "Scenario",
    "ScaledIdentity",
    "SharedEigenbasis",
    "WaldKernel",
    "assign",
    "centrex",
    "cost_J",
    "error_rate",
    "estimate_centroids",
    "estimate_covariances_mle",
    "estimate_sigma",
    "evaluate",
    "fuse",
    "generate",
    "iterate_to_fixed_point",
    "kmeanspp",
    "load_csv",
    "load_ruspini",
    "mahalanobis_sq",
    "mean_shift_map",
    "mean_shift_map_classic",
    "meanshift_cluster",
    "min_pairwise_stat",
    "mle_sigma",
    "parse_kernel",
    "silhouette",
    "verify_kernel_assumptions",
    "wald_test",
    "wald_threshold",
    "xmeans",
]
