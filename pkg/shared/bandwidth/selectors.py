"""
Model-specific bandwidth objectives and selectors
Wires the GW regression, GW PCA and GW DA objectives into the generic search
"""

import logging
from typing import Callable, Optional, Sequence, Union

import numpy as np

from shared.bandwidth.search import SearchResult, default_bounds, golden_section
from shared.data.dataset import Dataset
from shared.regression.basic import aicc_objective, cv_contributions_arrays, design_matrix
from shared.spatial.kernel import DistanceMetric, KernelFunction, KernelSpec, distance_matrix
from shared.stats.discriminant import GwdaSpec, prepare_classes, cv_misclassified
from shared.stats.pca import gwpca_cv_contrib
from shared.utils.errors import InputError

logger = logging.getLogger(__name__)

KernelFamily = Union[str, KernelFunction]
Objective = Callable[[Union[int, float]], float]


def _dmat(data: Dataset, metric: DistanceMetric, dmat: Optional[np.ndarray]) -> np.ndarray:
    return distance_matrix(data.points, metric) if dmat is None else dmat


def _search(objective, dmat, adaptive, min_neighbours, lower, upper, label) -> SearchResult:
    default_lower, default_upper = default_bounds(dmat, adaptive, min_neighbours)
    return golden_section(
        objective,
        default_lower if lower is None else lower,
        default_upper if upper is None else upper,
        adaptive,
        label=label
    )


def gwr_objective(
    data: Dataset,
    response: str,
    predictors: Sequence[str],
    function: KernelFamily,
    adaptive: bool,
    metric: DistanceMetric,
    objective: str = "aicc",
    dmat: Optional[np.ndarray] = None,
    intercept: bool = True
) -> Objective:
    """Bandwidth -> AICc or CV score of a basic GW regression"""
    if objective not in ("aicc", "cv"):
        raise InputError(f"Unknown bandwidth objective '{objective}'; expected 'aicc' or 'cv'")
    X, _ = design_matrix(data, predictors, intercept)
    y = data.column(response)
    dmat = _dmat(data, metric, dmat)

    def evaluate(bandwidth) -> float:
        kernel = KernelSpec(function, bandwidth, adaptive)
        if objective == "aicc":
            return aicc_objective(X, y, dmat, kernel)
        return float(np.sum(cv_contributions_arrays(X, y, dmat, kernel)))

    return evaluate


def bw_gwr(
    data: Dataset,
    response: str,
    predictors: Sequence[str],
    function: KernelFamily = "bisquare",
    adaptive: bool = True,
    metric: DistanceMetric = DistanceMetric(),
    objective: str = "aicc",
    lower=None,
    upper=None,
    dmat: Optional[np.ndarray] = None,
    intercept: bool = True
) -> SearchResult:
    """Optimal GW regression bandwidth by AICc or CV"""
    dmat = _dmat(data, metric, dmat)
    p = len(predictors) + (1 if intercept else 0)
    evaluate = gwr_objective(data, response, predictors, function, adaptive, metric, objective, dmat, intercept)
    return _search(evaluate, dmat, adaptive, 2 * (p + 1), lower, upper, f"gwr_{objective}")


def gwpca_objective(
    data: Dataset,
    k: int,
    function: KernelFamily,
    adaptive: bool,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None
) -> Objective:
    """Bandwidth -> GW PCA leave-one-out reconstruction error"""
    dmat = _dmat(data, metric, dmat)

    def evaluate(bandwidth) -> float:
        kernel = KernelSpec(function, bandwidth, adaptive)
        return float(np.sum(gwpca_cv_contrib(data, kernel, metric, k, dmat)))

    return evaluate


def bw_gwpca(
    data: Dataset,
    k: int,
    function: KernelFamily = "bisquare",
    adaptive: bool = True,
    metric: DistanceMetric = DistanceMetric(),
    lower=None,
    upper=None,
    dmat: Optional[np.ndarray] = None
) -> SearchResult:
    """Optimal GW PCA bandwidth by cross-validation"""
    dmat = _dmat(data, metric, dmat)
    evaluate = gwpca_objective(data, k, function, adaptive, metric, dmat)
    return _search(evaluate, dmat, adaptive, k + 2, lower, upper, "gwpca_cv")


def gwda_objective(
    data: Dataset,
    label_col: str,
    predictors: Sequence[str],
    spec: GwdaSpec,
    function: KernelFamily,
    adaptive: bool,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None
) -> Objective:
    """Bandwidth -> GW DA leave-one-out misclassification count"""
    X, members, classes = prepare_classes(data, label_col, predictors, spec)
    dmat = _dmat(data, metric, dmat)

    def evaluate(bandwidth) -> float:
        return cv_misclassified(X, members, classes, dmat, KernelSpec(function, bandwidth, adaptive), spec)

    return evaluate


def bw_gwda(
    data: Dataset,
    label_col: str,
    predictors: Sequence[str],
    spec: GwdaSpec,
    function: KernelFamily = "bisquare",
    adaptive: bool = True,
    metric: DistanceMetric = DistanceMetric(),
    lower=None,
    upper=None,
    dmat: Optional[np.ndarray] = None
) -> SearchResult:
    """Optimal GW DA bandwidth; ties go to the smaller bandwidth"""
    dmat = _dmat(data, metric, dmat)
    evaluate = gwda_objective(data, label_col, predictors, spec, function, adaptive, metric, dmat)
    return _search(evaluate, dmat, adaptive, 2 * (len(predictors) + 1), lower, upper, "gwda_cv")


def cv_contributions(
    kind: str,
    data: Dataset,
    kernel: KernelSpec,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None,
    **options
) -> np.ndarray:
    """
    Per-observation CV terms of a model

    gwr options: response, predictors, intercept (default True)
    gwpca options: k
    """
    dmat = _dmat(data, metric, dmat)
    if kind == "gwr":
        X, _ = design_matrix(data, options["predictors"], options.get("intercept", True))
        return cv_contributions_arrays(X, data.column(options["response"]), dmat, kernel)
    if kind == "gwpca":
        return gwpca_cv_contrib(data, kernel, metric, options["k"], dmat)
    raise InputError(f"CV contributions are available for 'gwr' and 'gwpca', not '{kind}'")
