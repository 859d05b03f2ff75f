"""
GW summary statistics
Geographically weighted means, standard deviations, covariances and correlations
at every calibration point, with a permutation test for non-stationarity
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from shared.data.dataset import Dataset
from shared.spatial.kernel import DistanceMetric, KernelSpec, distance_matrix, weight_matrix
from shared.utils.errors import DegenerateWindowError, InputError, UndefinedCorrelationError
from shared.utils.metrics import get_metrics
from shared.utils.montecarlo import (
    check_simulation_count, lower_tail_p, resolve_threads, run_simulations,
    two_tailed_flags, upper_tail_p
)

logger = logging.getLogger(__name__)

# local sd below this fraction of the data scale is treated as zero
ZERO_SD_RELATIVE = 1e-12


def _window_total(w: np.ndarray, index: Optional[int]) -> float:
    total = float(np.sum(w))
    if not total > 0.0:
        raise DegenerateWindowError(index)
    return total


def gw_mean(x: np.ndarray, w: np.ndarray, index: Optional[int] = None) -> float:
    """Weighted mean sum(w x) / sum(w)"""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    total = _window_total(w, index)
    return float(np.dot(w, x) / total)


def gw_covariance(x: np.ndarray, y: np.ndarray, w: np.ndarray, index: Optional[int] = None) -> float:
    """Weighted covariance centred at the GW means, divisor sum(w)"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    total = _window_total(w, index)
    mx = np.dot(w, x) / total
    my = np.dot(w, y) / total
    return float(np.dot(w, (x - mx) * (y - my)) / total)


def gw_sd(x: np.ndarray, w: np.ndarray, index: Optional[int] = None) -> float:
    """Weighted population standard deviation"""
    return float(np.sqrt(max(gw_covariance(x, x, w, index), 0.0)))


def _is_zero_sd(sd: float, x: np.ndarray) -> bool:
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    return sd <= ZERO_SD_RELATIVE * max(scale, 1.0)


def gw_correlation(x: np.ndarray, y: np.ndarray, w: np.ndarray, index: Optional[int] = None) -> float:
    """Weighted correlation c(x, y) / (s(x) s(y))"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx = gw_sd(x, w, index)
    sy = gw_sd(y, w, index)
    if _is_zero_sd(sx, x) or _is_zero_sd(sy, y):
        raise UndefinedCorrelationError(index)
    rho = gw_covariance(x, y, w, index) / (sx * sy)
    return float(np.clip(rho, -1.0, 1.0))


def local_moments(values: np.ndarray, w: np.ndarray, index: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """GW mean vector and population covariance matrix of all columns"""
    total = _window_total(w, index)
    mean = w @ values / total
    centred = values - mean
    cov = (centred * w[:, np.newaxis]).T @ centred / total
    cov = 0.5 * (cov + cov.T)
    return mean, cov


@dataclass
class GwssResult:
    """Per-location GW summary statistics"""
    names: List[str]
    means: np.ndarray
    sds: np.ndarray
    covariances: np.ndarray
    correlations: np.ndarray
    pair_labels: List[str]
    undefined: np.ndarray
    kernel: KernelSpec
    metric: DistanceMetric

    def to_columns(self) -> Dict[str, np.ndarray]:
        """Export columns in stable order"""
        columns: Dict[str, np.ndarray] = {}
        for k, name in enumerate(self.names):
            columns[f"{name}_LM"] = self.means[:, k]
        for k, name in enumerate(self.names):
            columns[f"{name}_LSD"] = self.sds[:, k]
        for k, pair in enumerate(self.pair_labels):
            columns[f"Cov_{pair}"] = self.covariances[:, k]
        for k, pair in enumerate(self.pair_labels):
            columns[f"Corr_{pair}"] = self.correlations[:, k]
        return columns


def pair_labels(names: Sequence[str]) -> List[str]:
    return [f"{a}.{b}" for a, b in combinations(names, 2)]


def _statistics(values: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Means, sds, covariances, correlations and undefined-correlation mask"""
    n, m = values.shape
    pairs = list(combinations(range(m), 2))
    means = np.empty((weights.shape[0], m))
    sds = np.empty((weights.shape[0], m))
    covs = np.empty((weights.shape[0], len(pairs)))
    corrs = np.empty((weights.shape[0], len(pairs)))
    undefined = np.zeros((weights.shape[0], len(pairs)), dtype=bool)
    scales = np.maximum(np.max(np.abs(values), axis=0), 1.0)

    for i in range(weights.shape[0]):
        mean, cov = local_moments(values, weights[i], i)
        sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        means[i] = mean
        sds[i] = sd
        zero = sd <= ZERO_SD_RELATIVE * scales
        for k, (a, b) in enumerate(pairs):
            covs[i, k] = cov[a, b]
            if zero[a] or zero[b]:
                corrs[i, k] = np.nan
                undefined[i, k] = True
            else:
                corrs[i, k] = np.clip(cov[a, b] / (sd[a] * sd[b]), -1.0, 1.0)
    return means, sds, covs, corrs, undefined


def gwss(
    data: Dataset,
    variables: Sequence[str],
    kernel: KernelSpec,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None
) -> GwssResult:
    """GW summary statistics at every observation location"""
    variables = list(variables)
    if data.n < 2:
        raise InputError("GW summary statistics need at least 2 observations")
    values = data.columns(variables)
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    weights = weight_matrix(dmat, kernel)

    means, sds, covs, corrs, undefined = _statistics(values, weights)
    get_metrics().record_local_fits("gwss", data.n)

    labels = pair_labels(variables)
    if undefined.any():
        for k, label in enumerate(labels):
            locs = np.flatnonzero(undefined[:, k])
            if locs.size:
                logger.warning(
                    f"Correlation {label} undefined (zero local sd) at {locs.size} location(s), "
                    f"first at index {int(locs[0])}"
                )

    return GwssResult(
        names=variables,
        means=means,
        sds=sds,
        covariances=covs,
        correlations=corrs,
        pair_labels=labels,
        undefined=undefined,
        kernel=kernel,
        metric=metric
    )


def global_statistics(data: Dataset, variables: Sequence[str]) -> Dict[str, float]:
    """Global mean, population sd, covariance and correlation of the selected variables"""
    variables = list(variables)
    values = data.columns(variables)
    mean, cov = local_moments(values, np.ones(data.n))
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    stats: Dict[str, float] = {}
    for k, name in enumerate(variables):
        stats[f"{name}_mean"] = float(mean[k])
        stats[f"{name}_sd"] = float(sd[k])
    for (a, b), label in zip(combinations(range(len(variables)), 2), pair_labels(variables)):
        stats[f"Cov_{label}"] = float(cov[a, b])
        if sd[a] > 0 and sd[b] > 0:
            stats[f"Corr_{label}"] = float(np.clip(cov[a, b] / (sd[a] * sd[b]), -1.0, 1.0))
        else:
            stats[f"Corr_{label}"] = float("nan")
    return stats


@dataclass
class McReport:
    """Per-location permutation test results for a set of statistics"""
    labels: List[str]
    pseudo_p: np.ndarray
    upper_p: np.ndarray
    flags: np.ndarray
    alpha: float
    nsim: int
    seed: int

    def to_columns(self) -> Dict[str, np.ndarray]:
        """pseudo-p and significance flag per statistic"""
        columns: Dict[str, np.ndarray] = {}
        for k, label in enumerate(self.labels):
            columns[label] = self.pseudo_p[:, k]
        for k, label in enumerate(self.labels):
            columns[f"{label}_sig"] = self.flags[:, k].astype(float)
        return columns


def _stacked(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    means, sds, covs, corrs, _ = _statistics(values, weights)
    return np.hstack([means, sds, covs, corrs])


def montecarlo_gwss(
    data: Dataset,
    variables: Sequence[str],
    kernel: KernelSpec,
    metric: DistanceMetric,
    nsim: int = 99,
    seed: int = 0,
    alpha: float = 0.05,
    threads: Optional[int] = None,
    dmat: Optional[np.ndarray] = None
) -> McReport:
    """Permutation test of every GW summary statistic at every location"""
    check_simulation_count(nsim, alpha, two_tailed=True)
    variables = list(variables)
    values = data.columns(variables)
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    weights = weight_matrix(dmat, kernel)

    labels = (
        [f"{v}_LM" for v in variables]
        + [f"{v}_LSD" for v in variables]
        + [f"Cov_{p}" for p in pair_labels(variables)]
        + [f"Corr_{p}" for p in pair_labels(variables)]
    )
    true_stats = _stacked(values, weights)

    def simulate(_: int, rng: np.random.Generator) -> np.ndarray:
        permutation = rng.permutation(data.n)
        return _stacked(values[permutation], weights)

    simulated = np.stack(
        run_simulations(simulate, nsim, seed, resolve_threads(threads), test_name="gwss")
    )
    lower = lower_tail_p(true_stats, simulated)
    upper = upper_tail_p(true_stats, simulated)
    flags = two_tailed_flags(lower, upper, alpha)
    logger.info(f"GW summary statistics Monte Carlo test: {nsim} simulations, seed {seed}")

    return McReport(
        labels=labels,
        pseudo_p=lower,
        upper_p=upper,
        flags=flags,
        alpha=alpha,
        nsim=nsim,
        seed=seed
    )
