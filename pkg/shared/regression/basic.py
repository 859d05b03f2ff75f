"""
Basic GW regression
Per-location weighted least squares with hat-matrix diagnostics, AICc,
leave-one-out CV, pseudo t-values, the coefficient-variability Monte Carlo
test and five-number coefficient summaries
"""

import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from shared.data.dataset import Dataset
from shared.spatial.kernel import DistanceMetric, KernelSpec, distance_matrix, weight_matrix
from shared.utils.errors import (
    AiccUndefinedError, DegenerateBandwidthError, DegenerateWindowError, InputError, SingularMatrixError
)
from shared.utils.metrics import get_metrics
from shared.utils.montecarlo import resolve_threads, run_simulations, upper_tail_p

logger = logging.getLogger(__name__)

INTERCEPT = "Intercept"

# smallest/largest singular value of the weighted design below this is singular
SINGULAR_RCOND = 1e-12


def design_matrix(
    data: Dataset,
    predictors: Sequence[str],
    intercept: bool = True
) -> Tuple[np.ndarray, List[str]]:
    """Design matrix with an optional leading intercept column"""
    predictors = list(predictors)
    if INTERCEPT in predictors:
        raise InputError(f"'{INTERCEPT}' is reserved; use the intercept flag instead")
    X = data.columns(predictors) if predictors else np.empty((data.n, 0))
    names = list(predictors)
    if intercept:
        X = np.hstack([np.ones((data.n, 1)), X])
        names = [INTERCEPT] + names
    if X.shape[1] == 0:
        raise InputError("A regression needs at least one term")
    return X, names


def local_operator(X: np.ndarray, w: np.ndarray) -> Optional[np.ndarray]:
    """C = (X'WX)^-1 X'W from an SVD of the sqrt(w)-scaled design, None if singular"""
    root_w = np.sqrt(w)
    U, s, Vt = np.linalg.svd(X * root_w[:, np.newaxis], full_matrices=False)
    if s.size == 0 or not s[0] > 0.0 or s[-1] < SINGULAR_RCOND * s[0]:
        return None
    return ((Vt.T / s) @ U.T) * root_w[np.newaxis, :]


@dataclass
class LocalSolution:
    """Raw per-location least-squares output"""
    coefficients: np.ndarray
    cc_diag: np.ndarray
    fitted: np.ndarray
    tr_s: float
    tr_sts: float
    hat: Optional[np.ndarray] = None


def local_fits(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    model: str = "gwr",
    keep_hat: bool = False
) -> LocalSolution:
    """Solve the local WLS problem at every calibration point (rows of weights)"""
    n, p = X.shape
    coefficients = np.empty((weights.shape[0], p))
    cc_diag = np.empty((weights.shape[0], p))
    fitted = np.empty(weights.shape[0])
    hat = np.empty((weights.shape[0], n)) if keep_hat else None
    tr_s = 0.0
    tr_sts = 0.0
    singular: List[int] = []

    for i in range(weights.shape[0]):
        C = local_operator(X, weights[i])
        if C is None:
            singular.append(i)
            continue
        row = X[i] @ C
        coefficients[i] = C @ y
        cc_diag[i] = np.einsum("kj,kj->k", C, C)
        fitted[i] = row @ y
        tr_s += row[i]
        tr_sts += row @ row
        if hat is not None:
            hat[i] = row

    get_metrics().record_local_fits(model, weights.shape[0] - len(singular), len(singular))
    if singular:
        raise SingularMatrixError(singular)
    return LocalSolution(coefficients, cc_diag, fitted, tr_s, tr_sts, hat)


def aicc_value(rss: float, n: int, tr_s: float) -> float:
    """AICc = 2n ln(sqrt(RSS/n)) + n ln(2 pi) + n (n + tr S) / (n - 2 - tr S)"""
    denominator = n - 2.0 - tr_s
    if not denominator > 0.0:
        raise AiccUndefinedError(
            f"AICc undefined: n - 2 - tr(S) = {denominator:.6g} is not positive (bandwidth too small)"
        )
    with np.errstate(divide="ignore"):
        log_sigma = 0.5 * np.log(rss / n)
    return float(2.0 * n * log_sigma + n * math.log(2.0 * math.pi) + n * (n + tr_s) / denominator)


@dataclass
class GwrFit:
    """Basic GW regression fit"""
    names: List[str]
    response: str
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    tr_S: float
    tr_StS: float
    sigma2_hat: float
    aicc: float
    enp: float
    rss: float
    local_r2: np.ndarray
    kernel: KernelSpec
    metric: DistanceMetric

    @property
    def n(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def p(self) -> int:
        return int(self.coefficients.shape[1])

    @property
    def bandwidth(self):
        return self.kernel.bandwidth

    def to_columns(self) -> Dict[str, np.ndarray]:
        columns: Dict[str, np.ndarray] = {}
        for k, name in enumerate(self.names):
            columns[name] = self.coefficients[:, k]
        for k, name in enumerate(self.names):
            columns[f"{name}_SE"] = self.std_errors[:, k]
        for k, name in enumerate(self.names):
            columns[f"{name}_t"] = self.t_values[:, k]
        columns['y'] = self.fitted + self.residuals
        columns['yhat'] = self.fitted
        columns['residual'] = self.residuals
        columns['Local_R2'] = self.local_r2
        return columns

    def diagnostics(self) -> Dict[str, float]:
        return {
            'rss': self.rss,
            'sigma2_hat': self.sigma2_hat,
            'aicc': self.aicc,
            'enp': self.enp,
            'tr_S': self.tr_S,
            'tr_StS': self.tr_StS
        }


def _local_r2(y: np.ndarray, fitted: np.ndarray, weights: np.ndarray) -> np.ndarray:
    residual_sq = (y - fitted) ** 2
    totals = weights.sum(axis=1)
    means = weights @ y / totals
    tss = np.einsum("ij,ij->i", weights, (y[np.newaxis, :] - means[:, np.newaxis]) ** 2)
    rss = weights @ residual_sq
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tss > 0.0, 1.0 - rss / tss, np.nan)


def _t_values(coefficients: np.ndarray, std_errors: np.ndarray) -> np.ndarray:
    zero_se = std_errors == 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        t = coefficients / std_errors
        t = np.where(zero_se, np.sign(coefficients) * np.inf, t)
    return np.where(zero_se & (coefficients == 0.0), 0.0, t)


def _assemble_fit(
    names: List[str],
    response: str,
    y: np.ndarray,
    solution: LocalSolution,
    weights: np.ndarray,
    kernel: KernelSpec,
    metric: DistanceMetric
) -> GwrFit:
    n = y.size
    residuals = y - solution.fitted
    rss = float(residuals @ residuals)
    dof = n - 2.0 * solution.tr_s + solution.tr_sts
    if dof > 0.0:
        sigma2 = rss / dof
    else:
        logger.warning(f"Residual degrees of freedom {dof:.6g} not positive; sigma2 and SEs undefined")
        sigma2 = math.nan
    std_errors = np.sqrt(sigma2 * solution.cc_diag)
    try:
        aicc = aicc_value(rss, n, solution.tr_s)
    except AiccUndefinedError as e:
        logger.warning(str(e))
        aicc = math.inf

    t_values = _t_values(solution.coefficients, std_errors)
    flagged = np.count_nonzero(std_errors == 0.0)
    if flagged:
        logger.warning(f"{flagged} local standard error(s) are zero; pseudo t-values set to +/-inf")

    return GwrFit(
        names=names,
        response=response,
        coefficients=solution.coefficients,
        std_errors=std_errors,
        t_values=t_values,
        fitted=solution.fitted,
        residuals=residuals,
        tr_S=solution.tr_s,
        tr_StS=solution.tr_sts,
        sigma2_hat=sigma2,
        aicc=aicc,
        enp=2.0 * solution.tr_s - solution.tr_sts,
        rss=rss,
        local_r2=_local_r2(y, solution.fitted, weights),
        kernel=kernel,
        metric=metric
    )


def _check_sizes(n: int, p: int):
    if not n > p:
        raise InputError(f"GW regression needs more observations than terms (n={n}, p={p})")


def gwr_basic(
    data: Dataset,
    response: str,
    predictors: Sequence[str],
    kernel: KernelSpec,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None,
    intercept: bool = True
) -> GwrFit:
    """Fit a basic GW regression at every observation location"""
    X, names = design_matrix(data, predictors, intercept)
    y = data.column(response)
    _check_sizes(data.n, X.shape[1])
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    weights = weight_matrix(dmat, kernel)
    solution = local_fits(X, y, weights)
    fit = _assemble_fit(names, response, y, solution, weights, kernel, metric)
    logger.info(f"GW regression fitted with {kernel.describe()}: AICc {fit.aicc:.6g}, enp {fit.enp:.4g}")
    return fit


def gwr_aicc(fit: GwrFit) -> float:
    """AICc of a fitted model; raises when n - 2 - tr(S) <= 0"""
    return aicc_value(fit.rss, fit.n, fit.tr_S)


def aicc_objective(X: np.ndarray, y: np.ndarray, dmat: np.ndarray, kernel: KernelSpec) -> float:
    """AICc at one bandwidth, inf when the fit or the criterion is unusable"""
    try:
        weights = weight_matrix(dmat, kernel)
        solution = local_fits(X, y, weights)
        residuals = y - solution.fitted
        return aicc_value(float(residuals @ residuals), y.size, solution.tr_s)
    except (SingularMatrixError, DegenerateWindowError, DegenerateBandwidthError, AiccUndefinedError):
        return math.inf


def cv_contributions_arrays(X: np.ndarray, y: np.ndarray, dmat: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """Squared leave-one-out prediction errors, inf where the local fit is singular"""
    n = y.size
    try:
        weights = weight_matrix(dmat, kernel)
    except DegenerateBandwidthError:
        return np.full(n, np.inf)
    contributions = np.empty(n)
    for i in range(n):
        w = weights[i].copy()
        w[i] = 0.0
        C = local_operator(X, w)
        if C is None:
            contributions[i] = np.inf
            continue
        contributions[i] = (y[i] - X[i] @ (C @ y)) ** 2
    return contributions


def gwr_cv_contrib(
    data: Dataset,
    response: str,
    predictors: Sequence[str],
    kernel: KernelSpec,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None,
    intercept: bool = True
) -> np.ndarray:
    """Per-observation CV terms (y_i - yhat_{-i})^2"""
    X, _ = design_matrix(data, predictors, intercept)
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    return cv_contributions_arrays(X, data.column(response), dmat, kernel)


def gwr_cv_score(
    data: Dataset,
    response: str,
    predictors: Sequence[str],
    kernel: KernelSpec,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None,
    intercept: bool = True
) -> float:
    """Leave-one-out CV score, inf when any leave-one-out fit is singular"""
    return float(np.sum(gwr_cv_contrib(data, response, predictors, kernel, metric, dmat, intercept)))


def pseudo_t(fit: GwrFit) -> np.ndarray:
    """Local coefficient over its standard error; +/-inf where the SE is zero"""
    return _t_values(fit.coefficients, fit.std_errors)


@dataclass
class GwrMcReport:
    """Per-coefficient test of spatial variability"""
    names: List[str]
    variances: np.ndarray
    simulated: np.ndarray
    p_values: np.ndarray
    nsim: int
    seed: int
    alpha: float = 0.05

    @property
    def significant(self) -> np.ndarray:
        return self.p_values <= self.alpha

    def to_columns(self) -> Dict[str, np.ndarray]:
        return {
            'coefficient': np.asarray(self.names, dtype=object),
            'variance': self.variances,
            'p_value': self.p_values
        }

    def format_report(self) -> str:
        lines = ["Tests based on the Monte Carlo significance test", ""]
        width = max(len(n) for n in self.names)
        lines.append(f"{'':<{width}}  p-value")
        for name, p in zip(self.names, self.p_values):
            lines.append(f"{name:<{width}}  {p:.2f}")
        return "\n".join(lines)


def montecarlo_gwr(
    data: Dataset,
    response: str,
    predictors: Sequence[str],
    kernel: KernelSpec,
    metric: DistanceMetric,
    nsim: int = 99,
    seed: int = 0,
    alpha: float = 0.05,
    threads: Optional[int] = None,
    dmat: Optional[np.ndarray] = None,
    intercept: bool = True
) -> GwrMcReport:
    """
    Test each coefficient surface for spatial variation

    The statistic is the variance of the coefficient over locations; data rows
    are permuted against fixed coordinates and the bandwidth is held fixed.
    """
    if nsim < 1:
        raise InputError(f"nsim must be at least 1, got {nsim}")
    X, names = design_matrix(data, predictors, intercept)
    y = data.column(response)
    _check_sizes(data.n, X.shape[1])
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    weights = weight_matrix(dmat, kernel)
    variances = np.var(local_fits(X, y, weights).coefficients, axis=0, ddof=1)

    def simulate(index: int, rng: np.random.Generator) -> np.ndarray:
        permutation = rng.permutation(data.n)
        try:
            coefficients = local_fits(X[permutation], y[permutation], weights).coefficients
        except SingularMatrixError:
            logger.debug(f"Simulation {index} singular; contributes -inf")
            return np.full(X.shape[1], -np.inf)
        return np.var(coefficients, axis=0, ddof=1)

    simulated = np.stack(
        run_simulations(simulate, nsim, seed, resolve_threads(threads), test_name="gwr")
    )
    p_values = upper_tail_p(variances, simulated)
    logger.info(f"GW regression Monte Carlo test: {nsim} simulations, seed {seed}")
    return GwrMcReport(
        names=names,
        variances=variances,
        simulated=simulated,
        p_values=p_values,
        nsim=nsim,
        seed=seed,
        alpha=alpha
    )


@dataclass
class CoefficientSummary:
    """Five-number summary (min, Q1, median, Q3, max) per coefficient"""
    names: List[str]
    table: np.ndarray

    def row(self, name: str) -> np.ndarray:
        return self.table[self.names.index(name)]

    def format_report(self, title: str = "Summary of GWR coefficient estimates:") -> str:
        width = max(max(len(n) for n in self.names), 9)
        header = ["Min.", "1st Qu.", "Median", "3rd Qu.", "Max."]
        lines = [title, f"{'':<{width}} " + " ".join(f"{h:>12}" for h in header)]
        for name, values in zip(self.names, self.table):
            lines.append(f"{name:<{width}} " + " ".join(f"{v:>12.7g}" for v in values))
        return "\n".join(lines)


def five_number_summary(names: Sequence[str], surfaces: np.ndarray) -> CoefficientSummary:
    """Quartiles by linear interpolation between order statistics"""
    table = np.percentile(surfaces, [0, 25, 50, 75, 100], axis=0).T
    return CoefficientSummary(list(names), table)


def coefficient_summary(fit: GwrFit) -> CoefficientSummary:
    return five_number_summary(fit.names, fit.coefficients)


def fit_report(fit: GwrFit) -> str:
    """Printable fit report: model, kernel, coefficient summary and diagnostics"""
    predictors = [n for n in fit.names if n != INTERCEPT]
    lines = [
        f"Dependent (y) variable: {fit.response}",
        f"Independent variables: {' '.join(predictors)}",
        f"Number of data points: {fit.n}",
        f"Kernel function: {fit.kernel.function.value}",
        f"{'Adaptive' if fit.kernel.adaptive else 'Fixed'} bandwidth: {fit.kernel.bandwidth}",
        "",
        coefficient_summary(fit).format_report(),
        "",
        "Diagnostic information",
        f"Number of data points: {fit.n}",
        f"Effective number of parameters (2trace(S) - trace(S'S)): {fit.enp:.6g}",
        f"Effective degrees of freedom (n-2trace(S) + trace(S'S)): {fit.n - fit.enp:.6g}",
        f"AICc: {fit.aicc:.6g}",
        f"Residual sum of squares: {fit.rss:.6g}",
        f"Sigma2 estimate: {fit.sigma2_hat:.6g}"
    ]
    return "\n".join(lines)
