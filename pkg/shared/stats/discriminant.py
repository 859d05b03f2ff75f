"""
GW discriminant analysis
Localised linear and quadratic discriminant rules built from GW class means,
covariances and priors, leave-one-out CV scoring and confusion matrices
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from shared.data.dataset import Dataset
from shared.spatial.kernel import DistanceMetric, KernelSpec, distance_matrix, weight_matrix
from shared.utils.errors import DegenerateBandwidthError, DegenerateWindowError, InputError
from shared.utils.metrics import get_metrics

logger = logging.getLogger(__name__)

RIDGE_RCOND = 1e-12
RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class GwdaSpec:
    """Discriminant rule: pooled (lda) or per-class (qda) covariance, GW or fixed priors"""
    method: Literal["lda", "qda"] = "qda"
    priors: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.method not in ("lda", "qda"):
            raise InputError(f"Discriminant method must be 'lda' or 'qda', got '{self.method}'")
        if self.priors is not None:
            priors = tuple(float(p) for p in self.priors)
            if any(not p > 0.0 for p in priors):
                raise InputError("Fixed priors must all be positive")
            if abs(sum(priors) - 1.0) > 1e-8:
                raise InputError(f"Fixed priors must sum to 1, got {sum(priors):.10g}")
            object.__setattr__(self, "priors", priors)

    @property
    def gw_priors(self) -> bool:
        return self.priors is None


@dataclass
class _RidgeCounter:
    applied: List[int] = field(default_factory=list)


def _regularise(cov: np.ndarray, index: int, ridge: _RidgeCounter) -> np.ndarray:
    q = cov.shape[0]
    if 1.0 / np.linalg.cond(cov) >= RIDGE_RCOND:
        return cov
    trace = float(np.trace(cov))
    ridge.applied.append(index)
    return cov + RIDGE_SCALE * (trace / q if trace > 0.0 else 1.0) * np.eye(q)


def _local_rule(
    X: np.ndarray,
    members: np.ndarray,
    w: np.ndarray,
    spec: GwdaSpec,
    classes: Sequence[str],
    index: int,
    ridge: _RidgeCounter
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """GW class means, (regularised) covariances and priors for one window"""
    n_classes, q = members.shape[0], X.shape[1]
    need = q + 1
    means = np.empty((n_classes, q))
    covs = np.empty((n_classes, q, q))
    totals = np.empty(n_classes)
    for c in range(n_classes):
        wc = w * members[c]
        support = np.count_nonzero(wc > 0.0)
        if support < need:
            raise DegenerateWindowError(
                index,
                f"Class '{classes[c]}' has {support} observation(s) with positive weight at "
                f"location {index}; at least {need} required"
            )
        totals[c] = wc.sum()
        means[c] = wc @ X / totals[c]
        centred = X - means[c]
        covs[c] = (centred * wc[:, np.newaxis]).T @ centred / totals[c]

    if spec.method == "lda":
        pooled = np.tensordot(totals, covs, axes=1) / totals.sum()
        covs[:] = _regularise(pooled, index, ridge)
    else:
        for c in range(n_classes):
            covs[c] = _regularise(covs[c], index, ridge)

    priors = totals / totals.sum() if spec.gw_priors else np.asarray(spec.priors)
    return means, covs, priors


def discriminant_scores(x: np.ndarray, means: np.ndarray, covs: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """LP_j = 0.5 Mahalanobis + 0.5 ln|Sigma_j| - ln p_j; smallest wins"""
    scores = np.empty(means.shape[0])
    for c in range(means.shape[0]):
        diff = x - means[c]
        _, logdet = np.linalg.slogdet(covs[c])
        scores[c] = 0.5 * diff @ np.linalg.solve(covs[c], diff) + 0.5 * logdet - math.log(priors[c])
    return scores


def _warn_ridge(ridge: _RidgeCounter):
    if ridge.applied:
        locations = sorted(set(ridge.applied))
        logger.warning(
            f"Near-singular local covariance regularised with a ridge at {len(locations)} "
            f"location(s), first at index {locations[0]}"
        )


@dataclass
class GwdaResult:
    """Per-location predictions, discriminant scores and local class moments"""
    classes: List[str]
    predicted: np.ndarray
    scores: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    priors: np.ndarray
    spec: GwdaSpec
    kernel: Optional[KernelSpec] = None

    def to_columns(self) -> Dict[str, np.ndarray]:
        columns: Dict[str, np.ndarray] = {'predicted': self.predicted}
        for c, name in enumerate(self.classes):
            columns[f"LP_{name}"] = self.scores[:, c]
        return columns


def prepare_classes(data: Dataset, label_col: str, predictors: Sequence[str], spec: GwdaSpec):
    labels = data.label(label_col)
    classes = [str(c) for c in np.unique(labels)]
    if len(classes) < 2:
        raise InputError(f"Discriminant analysis needs at least 2 classes in '{label_col}'")
    if spec.priors is not None and len(spec.priors) != len(classes):
        raise InputError(f"{len(spec.priors)} fixed priors given for {len(classes)} classes")
    members = np.stack([(labels == c).astype(float) for c in classes])
    return data.columns(list(predictors)), members, classes


def _fit_predict(X, members, classes, weights, spec) -> GwdaResult:
    n, q = X.shape
    n_classes = len(classes)
    scores = np.empty((n, n_classes))
    means = np.empty((n, n_classes, q))
    covs = np.empty((n, n_classes, q, q))
    priors = np.empty((n, n_classes))
    ridge = _RidgeCounter()
    for i in range(n):
        means[i], covs[i], priors[i] = _local_rule(X, members, weights[i], spec, classes, i, ridge)
        scores[i] = discriminant_scores(X[i], means[i], covs[i], priors[i])
    _warn_ridge(ridge)
    predicted = np.asarray(classes, dtype=object)[np.argmin(scores, axis=1)].astype(str)
    return GwdaResult(classes, predicted, scores, means, covs, priors, spec)


def gwda_fit_predict(
    data: Dataset,
    label_col: str,
    predictors: Sequence[str],
    spec: GwdaSpec,
    kernel: KernelSpec,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None
) -> GwdaResult:
    """Classify every observation with the discriminant rule localised at its own location"""
    X, members, classes = prepare_classes(data, label_col, predictors, spec)
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    result = _fit_predict(X, members, classes, weight_matrix(dmat, kernel), spec)
    result.kernel = kernel
    get_metrics().record_local_fits("gwda", data.n)
    return result


def global_fit_predict(data: Dataset, label_col: str, predictors: Sequence[str], spec: GwdaSpec) -> GwdaResult:
    """Ordinary (global) discriminant analysis on the same rule"""
    X, members, classes = prepare_classes(data, label_col, predictors, spec)
    return _fit_predict(X, members, classes, np.broadcast_to(np.ones(data.n), (data.n, data.n)), spec)


def cv_misclassified(
    X: np.ndarray,
    members: np.ndarray,
    classes: Sequence[str],
    dmat: np.ndarray,
    kernel: KernelSpec,
    spec: GwdaSpec
) -> float:
    """Leave-one-out misclassification count, inf when a window is degenerate"""
    try:
        weights = weight_matrix(dmat, kernel)
    except DegenerateBandwidthError:
        return math.inf
    actual = np.argmax(members, axis=0)
    ridge = _RidgeCounter()
    wrong = 0
    for i in range(X.shape[0]):
        w = weights[i].copy()
        w[i] = 0.0
        try:
            means, covs, priors = _local_rule(X, members, w, spec, classes, i, ridge)
        except DegenerateWindowError:
            return math.inf
        if int(np.argmin(discriminant_scores(X[i], means, covs, priors))) != actual[i]:
            wrong += 1
    if ridge.applied:
        logger.debug(f"Ridge applied at {len(set(ridge.applied))} leave-one-out window(s)")
    return float(wrong)


def gwda_cv_score(
    data: Dataset,
    label_col: str,
    predictors: Sequence[str],
    spec: GwdaSpec,
    kernel: KernelSpec,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None
) -> float:
    """Number of observations misclassified when predicted with their own weight zeroed"""
    X, members, classes = prepare_classes(data, label_col, predictors, spec)
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    return cv_misclassified(X, members, classes, dmat, kernel, spec)


@dataclass
class ConfusionMatrix:
    """Counts with predicted classes on rows and actual classes on columns"""
    classes: List[str]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def column_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def format_report(self) -> str:
        width = max(max(len(c) for c in self.classes), 9)
        header = f"{'predicted':<{width}} " + " ".join(f"{c:>{width}}" for c in self.classes) + f" {'Total':>{width}}"
        lines = [header]
        for name, row in zip(self.classes, self.counts):
            lines.append(
                f"{name:<{width}} " + " ".join(f"{v:>{width}d}" for v in row) + f" {int(row.sum()):>{width}d}"
            )
        lines.append(
            f"{'Total':<{width}} " + " ".join(f"{int(v):>{width}d}" for v in self.column_totals)
            + f" {self.total:>{width}d}"
        )
        lines.append(f"Correct classification rate: {classification_rate(self):.4f}")
        return "\n".join(lines)


def confusion_matrix(
    actual: Sequence[str],
    predicted: Sequence[str],
    classes: Optional[Sequence[str]] = None
) -> ConfusionMatrix:
    actual = np.asarray(actual).astype(str)
    predicted = np.asarray(predicted).astype(str)
    if actual.shape != predicted.shape:
        raise InputError(f"{actual.size} actual labels but {predicted.size} predicted labels")
    classes = [str(c) for c in (classes if classes is not None else np.unique(actual))]
    unknown = sorted(set(np.unique(predicted)) - set(classes))
    if unknown:
        raise InputError(f"Predicted label(s) not among the actual classes: {', '.join(unknown)}")
    unknown = sorted(set(np.unique(actual)) - set(classes))
    if unknown:
        raise InputError(f"Actual label(s) not among the given classes: {', '.join(unknown)}")
    position = {c: k for k, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=int)
    np.add.at(counts, ([position[p] for p in predicted], [position[a] for a in actual]), 1)
    return ConfusionMatrix(classes, counts)


def classification_rate(matrix: ConfusionMatrix) -> float:
    """Share of correctly classified observations"""
    if matrix.total == 0:
        raise InputError("Empty confusion matrix")
    return float(np.trace(matrix.counts) / matrix.total)
