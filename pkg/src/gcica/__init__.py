"""Sparse, non-negative, graph-connected ICA.

Loadings ``A`` (K x N) are fit to the correlation of standardized time
series under the model ``Sigma = A^T A + Diag(gamma)``, with an L1 penalty,
a graph-Laplacian smoothness penalty, non-negativity and unit node variance.
"""

__version__ = "0.1.0"

from .errors import NotPositiveDefiniteError, NumericalError, TrustRegionError, ValidationError
from .graph import Graph, Laplacian, build_graph, combinatorial_laplacian, laplacian, regularized_laplacian
from .kernels import BACKEND
from .metrics import MetricsReport, evaluate, match_components
from .model import implied_correlation, standardize, stein_loss
from .robustness import (
    ComponentBank,
    ClusterReport,
    cluster_means,
    correlation_bank,
    eta_sweep,
    knn_statistic,
    make_bank,
    permutation_curve,
    permutation_test,
    threshold_clusters,
)
from .solver import FitResult, SolverConfig, fit
from .synthetic import SyntheticConfig, SyntheticInstance, generate_instance

__all__ = [
    "BACKEND", "ClusterReport", "ComponentBank", "FitResult", "Graph", "Laplacian",
    "MetricsReport", "NotPositiveDefiniteError", "NumericalError", "SolverConfig",
    "SyntheticConfig", "SyntheticInstance", "TrustRegionError", "ValidationError",
    "build_graph", "cluster_means", "combinatorial_laplacian", "correlation_bank",
    "eta_sweep", "evaluate", "fit", "generate_instance", "implied_correlation",
    "knn_statistic", "laplacian", "make_bank", "match_components", "permutation_curve",
    "permutation_test", "regularized_laplacian", "standardize", "stein_loss",
    "threshold_clusters",
]
