"""
GW regression extensions
Mixed (semi-parametric) GW regression fitted by back-fitting, and
heteroskedastic GW regression with GW-smoothed local error variances
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from shared.data.dataset import Dataset
from shared.regression.basic import (
    INTERCEPT, GwrFit, five_number_summary, local_fits
)
from shared.spatial.kernel import DistanceMetric, KernelSpec, distance_matrix, weight_matrix
from shared.utils.errors import InputError, SingularMatrixError

logger = logging.getLogger(__name__)

BACKFIT_TOLERANCE = 1e-6
BACKFIT_MAX_ITER = 50
HETERO_TOLERANCE = 1e-4
HETERO_MAX_ITER = 20
VARIANCE_FLOOR = 1e-8


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v ** 2)))


def _columns(data: Dataset, names: Sequence[str], with_intercept: bool):
    block = [np.ones(data.n)] if with_intercept else []
    block += [data.column(name) for name in names]
    labels = ([INTERCEPT] if with_intercept else []) + list(names)
    X = np.column_stack(block) if block else np.empty((data.n, 0))
    return X, labels


def _projection(X: np.ndarray) -> np.ndarray:
    """Hat matrix of an ordinary least-squares fit"""
    n = X.shape[0]
    if X.shape[1] == 0:
        return np.zeros((n, n))
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    if not s[0] > 0.0 or s[-1] < 1e-12 * s[0]:
        raise SingularMatrixError([], "Global part of the mixed model has a rank-deficient design")
    return U @ U.T


@dataclass
class MixedGwrFit:
    """Mixed GW regression: constant global terms plus local coefficient surfaces"""
    response: str
    global_names: List[str]
    global_coefficients: np.ndarray
    local_names: List[str]
    local_coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    kernel: KernelSpec
    metric: DistanceMetric
    changes: List[float] = field(default_factory=list)

    def to_columns(self) -> Dict[str, np.ndarray]:
        columns: Dict[str, np.ndarray] = {}
        n = self.fitted.size
        for k, name in enumerate(self.local_names):
            columns[f"{name}_L"] = self.local_coefficients[:, k]
        for k, name in enumerate(self.global_names):
            columns[f"{name}_F"] = np.full(n, self.global_coefficients[k])
        columns['yhat'] = self.fitted
        columns['residual'] = self.residuals
        return columns

    def format_report(self) -> str:
        lines = [
            "Summary of mixed GWR coefficient estimates:",
            f"Estimated global variables: {' '.join(self.global_names)}",
            "Estimated global coefficients: " + " ".join(f"{c:.7g}" for c in self.global_coefficients),
            f"Estimated GWR variables: {' '.join(self.local_names)}",
        ]
        if self.local_names:
            lines.append(five_number_summary(self.local_names, self.local_coefficients).format_report(
                "Summary of GWR coefficient estimates:"
            ))
        status = "converged" if self.converged else "did not converge"
        lines.append(f"Back-fitting {status} after {self.iterations} iteration(s)")
        return "\n".join(lines)


def _declare_converged(changes: List[float], tolerance: float) -> bool:
    if changes[-1] > tolerance:
        return False
    recent = changes[-3:]
    return all(later <= earlier for earlier, later in zip(recent, recent[1:]))


def gwr_mixed(
    data: Dataset,
    response: str,
    local_vars: Sequence[str],
    global_vars: Sequence[str],
    kernel: KernelSpec,
    metric: DistanceMetric,
    intercept_fixed: bool = False,
    dmat: Optional[np.ndarray] = None,
    tolerance: float = BACKFIT_TOLERANCE,
    max_iter: int = BACKFIT_MAX_ITER
) -> MixedGwrFit:
    """
    Mixed GW regression by back-fitting

    Alternates the global OLS smoother S_a and the GW regression smoother S_b
    until the RMS change of the fitted values, relative to RMS(y), falls below
    the tolerance. The bandwidth is taken as given.
    """
    local_vars, global_vars = list(local_vars), list(global_vars)
    overlap = sorted(set(local_vars) & set(global_vars))
    if overlap:
        raise InputError(f"Variables cannot be both local and global: {', '.join(overlap)}")
    X_a, a_names = _columns(data, global_vars, intercept_fixed)
    X_b, b_names = _columns(data, local_vars, not intercept_fixed)
    y = data.column(response)
    n = data.n
    if not n > X_a.shape[1] + X_b.shape[1]:
        raise InputError(f"Mixed GW regression needs more observations than terms (n={n})")
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    weights = weight_matrix(dmat, kernel)

    S_a = _projection(X_a)
    S_b = local_fits(X_b, y, weights, model="gwr_mixed", keep_hat=True).hat if X_b.shape[1] else np.zeros((n, n))

    y_a = S_a @ y
    y_b = np.zeros(n)
    previous = y_a + y_b
    scale = _rms(y) or 1.0
    changes: List[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        y_b = S_b @ (y - y_a)
        y_a = S_a @ (y - y_b)
        current = y_a + y_b
        changes.append(_rms(current - previous) / scale)
        previous = current
        logger.debug(f"Back-fitting iteration {iterations}: relative change {changes[-1]:.3g}")
        if _declare_converged(changes, tolerance):
            converged = True
            break

    if not converged:
        logger.warning(
            f"Back-fitting did not converge in {max_iter} iterations "
            f"(last relative change {changes[-1]:.3g}, tolerance {tolerance:g})"
        )

    if X_a.shape[1]:
        global_coefficients = np.linalg.lstsq(X_a, y - y_b, rcond=None)[0]
        global_part = X_a @ global_coefficients
    else:
        global_coefficients = np.empty(0)
        global_part = np.zeros(n)

    if X_b.shape[1]:
        local = local_fits(X_b, y - global_part, weights, model="gwr_mixed")
        local_coefficients, local_part = local.coefficients, local.fitted
    else:
        local_coefficients, local_part = np.empty((n, 0)), np.zeros(n)

    fitted = global_part + local_part
    return MixedGwrFit(
        response=response,
        global_names=a_names,
        global_coefficients=global_coefficients,
        local_names=b_names,
        local_coefficients=local_coefficients,
        fitted=fitted,
        residuals=y - fitted,
        iterations=iterations,
        converged=converged,
        kernel=kernel,
        metric=metric,
        changes=changes
    )


def compare_local_variability(mixed: MixedGwrFit, basic: GwrFit) -> Dict[str, bool]:
    """Whether each mixed local surface varies no more than its basic counterpart"""
    outcome: Dict[str, bool] = {}
    for k, name in enumerate(mixed.local_names):
        if name not in basic.names:
            continue
        mixed_var = float(np.var(mixed.local_coefficients[:, k], ddof=1))
        basic_var = float(np.var(basic.coefficients[:, basic.names.index(name)], ddof=1))
        outcome[name] = mixed_var <= basic_var
        if not outcome[name]:
            logger.warning(
                f"Mixed-model surface for {name} is more variable than the basic fit "
                f"({mixed_var:.6g} > {basic_var:.6g})"
            )
    return outcome


@dataclass
class HeteroGwrFit:
    """Heteroskedastic GW regression coefficients and local error variances"""
    response: str
    names: List[str]
    coefficients: np.ndarray
    variances: np.ndarray
    iterations: int
    converged: bool
    initial_coefficients: np.ndarray
    kernel: KernelSpec
    metric: DistanceMetric

    def to_columns(self) -> Dict[str, np.ndarray]:
        columns = {name: self.coefficients[:, k] for k, name in enumerate(self.names)}
        columns['local_variance'] = self.variances
        return columns


def gwr_hetero(
    data: Dataset,
    response: str,
    predictors: Sequence[str],
    kernel: KernelSpec,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None,
    intercept: bool = True,
    tolerance: float = HETERO_TOLERANCE,
    max_iter: int = HETERO_MAX_ITER
) -> HeteroGwrFit:
    """
    GW regression with a non-stationary error variance

    Squared residuals are GW-smoothed with the coefficient kernel to estimate
    local variances; observation weights are divided by those variances and
    the model refitted until the coefficients settle.
    """
    X, names = _columns(data, predictors, intercept)
    y = data.column(response)
    if not data.n > X.shape[1]:
        raise InputError(f"GW regression needs more observations than terms (n={data.n}, p={X.shape[1]})")
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    weights = weight_matrix(dmat, kernel)

    solution = local_fits(X, y, weights, model="gwr_hetero")
    initial = solution.coefficients
    coefficients = initial
    residuals = y - solution.fitted
    var_y = float(np.var(y))
    floor = VARIANCE_FLOOR * var_y if var_y > 0.0 else VARIANCE_FLOOR
    totals = weights.sum(axis=1)

    variances = np.ones(data.n)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        variances = weights @ residuals ** 2 / totals
        clamped = variances <= floor
        if clamped.any():
            logger.warning(
                f"Local error variance at or below the floor {floor:.3g} at "
                f"{int(clamped.sum())} location(s); clamped"
            )
            variances = np.where(clamped, floor, variances)
        solution = local_fits(X, y, weights / variances[np.newaxis, :], model="gwr_hetero")
        scale = float(np.max(np.abs(coefficients)))
        change = float(np.max(np.abs(solution.coefficients - coefficients)))
        if scale > 0.0:
            change /= scale
        coefficients = solution.coefficients
        residuals = y - solution.fitted
        logger.debug(f"Heteroskedastic iteration {iterations}: relative coefficient change {change:.3g}")
        if change <= tolerance:
            converged = True
            break

    if not converged:
        logger.warning(f"Heteroskedastic GW regression did not converge in {max_iter} iterations")

    return HeteroGwrFit(
        response=response,
        names=names,
        coefficients=coefficients,
        variances=variances,
        iterations=iterations,
        converged=converged,
        initial_coefficients=initial,
        kernel=kernel,
        metric=metric
    )
