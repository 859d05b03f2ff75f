"""
GW principal components analysis
Local covariance eigen-decompositions, proportions of total variance,
leave-one-out cross-validation and the eigenvalue-variability Monte Carlo test
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from shared.bandwidth.search import default_bounds, golden_section, grid_profile
from shared.data.dataset import Dataset
from shared.spatial.kernel import DistanceMetric, KernelSpec, distance_matrix, weight_matrix
from shared.stats.summary import local_moments
from shared.utils.errors import (
    DegenerateBandwidthError, DegenerateWindowError, InputError, NoValidBandwidthError, NumericalError
)
from shared.utils.metrics import get_metrics
from shared.utils.montecarlo import resolve_threads, run_simulations, upper_tail_p

logger = logging.getLogger(__name__)

FALLBACK_GRID_POINTS = 20


def standardize_global(data: Dataset) -> Dataset:
    """Centre and scale every column by its global mean and sample sd"""
    values = data.values
    if data.n < 2:
        raise InputError("Standardisation needs at least 2 observations")
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1)
    for k, name in enumerate(data.names):
        if not sd[k] > 0.0:
            raise InputError(f"Column '{name}' has zero variance and cannot be standardised")
    return data.with_values((values - mean) / sd)


def local_covariance(data, w: np.ndarray, index: Optional[int] = None) -> np.ndarray:
    """GW covariance matrix centred at the GW means, normalised by the weight sum"""
    values = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    _, cov = local_moments(values, np.asarray(w, dtype=float), index)
    return cov


def apply_sign_convention(loadings: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude in each is nonnegative"""
    loadings = np.array(loadings, dtype=float)
    rows = np.argmax(np.abs(loadings), axis=0)
    signs = np.where(loadings[rows, np.arange(loadings.shape[1])] < 0.0, -1.0, 1.0)
    return loadings * signs


def _decompose(cov: np.ndarray, index: int) -> Tuple[np.ndarray, np.ndarray]:
    try:
        values, vectors = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Eigen-decomposition failed at location {index}: {e}") from e
    values = np.clip(values[::-1], 0.0, None)
    vectors = apply_sign_convention(vectors[:, ::-1])
    return values, vectors


@dataclass
class GwpcaResult:
    """Local eigenvalues, loadings and PTV at every observation location"""
    names: List[str]
    k: int
    eigenvalues: np.ndarray
    loadings: np.ndarray
    ptv: np.ndarray
    values: np.ndarray
    kernel: KernelSpec
    metric: DistanceMetric

    @property
    def n(self) -> int:
        return int(self.eigenvalues.shape[0])

    def scores(self, location: int) -> np.ndarray:
        """Scores of every observation under the loadings of one location (n x k)"""
        return self.values @ self.loadings[location][:, :self.k]

    @property
    def local_scores(self) -> np.ndarray:
        """Each observation scored with its own location's loadings (n x k)"""
        return np.einsum("im,imc->ic", self.values, self.loadings[:, :, :self.k])

    def cumulative_ptv(self, components: int) -> np.ndarray:
        """Percentage of local variance carried by the first components"""
        if not 1 <= components <= self.ptv.shape[1]:
            raise InputError(f"components must lie in [1, {self.ptv.shape[1]}], got {components}")
        return self.ptv[:, :components].sum(axis=1)

    def winning_variable(self, component: int = 1) -> np.ndarray:
        """Variable with the largest absolute loading on a component at each location"""
        column = self.loadings[:, :, component - 1]
        winners = np.argmax(np.abs(column), axis=1)
        return np.asarray(self.names, dtype=object)[winners]

    def to_columns(self) -> Dict[str, np.ndarray]:
        columns: Dict[str, np.ndarray] = {}
        for c in range(self.k):
            columns[f"PTV_{c + 1}"] = self.ptv[:, c]
        columns[f"PTV_1_to_{self.k}"] = self.cumulative_ptv(self.k)
        for c in range(self.k):
            columns[f"Eigen_{c + 1}"] = self.eigenvalues[:, c]
        for c in range(self.k):
            for v, name in enumerate(self.names):
                columns[f"PC{c + 1}_{name}"] = self.loadings[:, v, c]
        local = self.local_scores
        for c in range(self.k):
            columns[f"Score_{c + 1}"] = local[:, c]
        columns["win_var_PC1"] = self.winning_variable(1)
        return columns

    def loadings_table(self) -> Dict[str, np.ndarray]:
        """Long format: one row per location, component and variable"""
        n, m = self.n, len(self.names)
        location = np.repeat(np.arange(n), self.k * m)
        component = np.tile(np.repeat(np.arange(1, self.k + 1), m), n)
        variable = np.tile(np.asarray(self.names, dtype=object), n * self.k)
        loading = self.loadings[:, :, :self.k].transpose(0, 2, 1).reshape(-1)
        return {'location': location, 'component': component, 'variable': variable, 'loading': loading}


def gwpca(
    data: Dataset,
    kernel: KernelSpec,
    metric: DistanceMetric,
    k: int,
    dmat: Optional[np.ndarray] = None
) -> GwpcaResult:
    """Local PCA at every observation location"""
    m = data.m
    if not 1 <= k <= m:
        raise InputError(f"Number of components must lie in [1, {m}], got {k}")
    if data.n < 2:
        raise InputError("GW PCA needs at least 2 observations")
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    weights = weight_matrix(dmat, kernel)
    values = data.values

    eigenvalues = np.empty((data.n, m))
    loadings = np.empty((data.n, m, m))
    for i in range(data.n):
        _, cov = local_moments(values, weights[i], i)
        eigenvalues[i], loadings[i] = _decompose(cov, i)
    get_metrics().record_local_fits("gwpca", data.n)

    totals = eigenvalues.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        ptv = np.where(totals > 0.0, 100.0 * eigenvalues / totals, np.nan)
    zero_total = np.flatnonzero(~(totals[:, 0] > 0.0))
    if zero_total.size:
        logger.warning(
            f"Local total variance is zero at {zero_total.size} location(s), "
            f"first at index {int(zero_total[0])}; PTV left undefined"
        )

    return GwpcaResult(
        names=list(data.names),
        k=k,
        eigenvalues=eigenvalues,
        loadings=loadings,
        ptv=ptv,
        values=np.array(values),
        kernel=kernel,
        metric=metric
    )


def _cv_contributions(values: np.ndarray, dmat: np.ndarray, kernel: KernelSpec, k: int) -> np.ndarray:
    n = values.shape[0]
    try:
        weights = weight_matrix(dmat, kernel)
    except (DegenerateWindowError, DegenerateBandwidthError):
        return np.full(n, np.inf)

    contributions = np.empty(n)
    for i in range(n):
        w = weights[i].copy()
        w[i] = 0.0
        if np.count_nonzero(w > 0.0) <= 1:
            contributions[i] = np.inf
            continue
        _, cov = local_moments(values, w, i)
        _, vectors = np.linalg.eigh(cov)
        leading = vectors[:, ::-1][:, :k]
        x = values[i]
        residual = x - (x @ leading) @ leading.T
        contributions[i] = float(residual @ residual)
    return contributions


def _check_cv_components(k: int, m: int):
    if not 1 <= k < m:
        raise InputError(f"Cross-validation needs 1 <= k < m (k={k}, m={m})")


def gwpca_cv_contrib(
    data: Dataset,
    kernel: KernelSpec,
    metric: DistanceMetric,
    k: int,
    dmat: Optional[np.ndarray] = None
) -> np.ndarray:
    """Leave-one-out reconstruction error of each observation"""
    _check_cv_components(k, data.m)
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    return _cv_contributions(data.values, dmat, kernel, k)


def gwpca_cv_score(
    data: Dataset,
    kernel: KernelSpec,
    metric: DistanceMetric,
    k: int,
    dmat: Optional[np.ndarray] = None
) -> float:
    """Sum of leave-one-out reconstruction errors; inf when any window is degenerate"""
    return float(np.sum(gwpca_cv_contrib(data, kernel, metric, k, dmat)))


def _eigenvalue_sd(values: np.ndarray, weights: np.ndarray, component: int) -> float:
    lam = np.empty(values.shape[0])
    for i in range(values.shape[0]):
        _, cov = local_moments(values, weights[i], i)
        lam[i] = np.linalg.eigvalsh(cov)[::-1][component - 1]
    return float(np.std(lam, ddof=1))


def _reselect_bandwidth(values: np.ndarray, dmat: np.ndarray, kernel: KernelSpec, k: int, index: int):
    lower, upper = default_bounds(dmat, kernel.adaptive, k + 2)

    def objective(bandwidth) -> float:
        return float(np.sum(_cv_contributions(values, dmat, kernel.with_bandwidth(bandwidth), k)))

    try:
        return golden_section(
            objective, lower, upper, kernel.adaptive, label="gwpca_cv", check_minima=False
        ).bandwidth
    except NoValidBandwidthError:
        logger.warning(f"Simulation {index}: golden-section bandwidth search failed, retrying on a grid")

    grid = np.linspace(lower, upper, FALLBACK_GRID_POINTS)
    profile = grid_profile(objective, grid, kernel.adaptive, label="gwpca_cv")
    if profile.argmin is None:
        raise NumericalError(
            f"Simulation {index}: no bandwidth in [{lower}, {upper}] gives a finite GW PCA CV score"
        )
    return profile.argmin


@dataclass
class GwpcaMcReport:
    """Eigenvalue variability test: true SD, simulated SDs and pseudo-p"""
    statistic: float
    simulated: np.ndarray
    bandwidths: np.ndarray
    p_value: float
    component: int
    nsim: int
    seed: int
    reoptimized: bool
    alpha: float = 0.05

    @property
    def significant(self) -> bool:
        return self.p_value <= self.alpha

    def to_columns(self) -> Dict[str, np.ndarray]:
        """Simulated distribution, one row per simulation"""
        return {
            'simulation': np.arange(1, self.nsim + 1),
            'eigenvalue_sd': self.simulated,
            'bandwidth': self.bandwidths
        }

    def summary(self) -> Dict[str, float]:
        return {
            'statistic': self.statistic,
            'p_value': self.p_value,
            'component': self.component,
            'nsim': self.nsim,
            'seed': self.seed
        }


def montecarlo_gwpca(
    data: Dataset,
    kernel: KernelSpec,
    metric: DistanceMetric,
    k: int,
    nsim: int = 99,
    seed: int = 0,
    reoptimize: bool = True,
    component: int = 1,
    alpha: float = 0.05,
    threads: Optional[int] = None,
    dmat: Optional[np.ndarray] = None
) -> GwpcaMcReport:
    """
    Test whether a local eigenvalue varies more across space than under random
    relocation of the data rows

    The statistic is the SD over locations of the chosen component's eigenvalue;
    with reoptimize the bandwidth is re-selected by CV on every permutation.
    """
    if nsim < 1:
        raise InputError(f"nsim must be at least 1, got {nsim}")
    if not 1 <= component <= data.m:
        raise InputError(f"component must lie in [1, {data.m}], got {component}")
    if reoptimize:
        _check_cv_components(k, data.m)
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    values = data.values
    statistic = _eigenvalue_sd(values, weight_matrix(dmat, kernel), component)

    def simulate(index: int, rng: np.random.Generator) -> Tuple[float, float]:
        permuted = values[rng.permutation(data.n)]
        spec = kernel
        if reoptimize:
            spec = kernel.with_bandwidth(_reselect_bandwidth(permuted, dmat, kernel, k, index))
        return _eigenvalue_sd(permuted, weight_matrix(dmat, spec), component), float(spec.bandwidth)

    outcomes = run_simulations(simulate, nsim, seed, resolve_threads(threads), test_name="gwpca")
    simulated = np.array([o[0] for o in outcomes])
    bandwidths = np.array([o[1] for o in outcomes])
    p_value = float(upper_tail_p(np.asarray(statistic), simulated))
    logger.info(
        f"GW PCA Monte Carlo test: component {component} eigenvalue SD {statistic:.6g}, "
        f"p = {p_value:.4f} ({nsim} simulations, seed {seed})"
    )

    return GwpcaMcReport(
        statistic=statistic,
        simulated=simulated,
        bandwidths=bandwidths,
        p_value=p_value,
        component=component,
        nsim=nsim,
        seed=seed,
        reoptimized=reoptimize,
        alpha=alpha
    )
