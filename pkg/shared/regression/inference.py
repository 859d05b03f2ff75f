"""
Inference for GW regression
p-values from pseudo t-values, multiple-testing adjustments and local
collinearity diagnostics
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from scipy.stats import norm
from statsmodels.stats.multitest import multipletests

from shared.data.dataset import Dataset
from shared.regression.basic import GwrFit, design_matrix
from shared.spatial.kernel import DistanceMetric, KernelSpec, distance_matrix, weight_matrix
from shared.stats.summary import local_moments, pair_labels
from shared.utils.errors import InputError

logger = logging.getLogger(__name__)

ADJUSTMENTS = ("bh", "by", "bonferroni", "fb")
_STATSMODELS_METHODS = {'bh': 'fdr_bh', 'by': 'fdr_by', 'bonferroni': 'bonferroni'}

CORRELATION_THRESHOLD = 0.8
VIF_THRESHOLD = 10.0
VDP_THRESHOLD = 0.5
CN_THRESHOLD = 30.0


def t_to_p(t_values: np.ndarray) -> np.ndarray:
    """Two-sided p-values against the standard normal"""
    return 2.0 * norm.sf(np.abs(np.asarray(t_values, dtype=float)))


@dataclass(frozen=True)
class FitContext:
    """Model complexity used by the fb adjustment"""
    enp: float
    n_params: int

    @property
    def fb_factor(self) -> float:
        return 1.0 + self.enp - self.enp / self.n_params

    @classmethod
    def from_fit(cls, fit: GwrFit) -> "FitContext":
        return cls(enp=fit.enp, n_params=fit.p)


def _adjust_vector(p: np.ndarray, method: str) -> np.ndarray:
    out = np.full(p.shape, np.nan)
    finite = np.isfinite(p)
    if finite.any():
        out[finite] = multipletests(p[finite], method=_STATSMODELS_METHODS[method])[1]
    return out


def adjust(
    p_values: np.ndarray,
    method: str,
    context: Optional[FitContext] = None,
    family: Literal["coefficient", "all"] = "coefficient"
) -> np.ndarray:
    """
    Adjust an n x p matrix of p-values for multiple testing

    The family is each coefficient's column by default, or all n x p tests.
    fb scales p by 1 + p_e - p_e/np, which is equivalent to testing the raw
    p-value at alpha / (1 + p_e - p_e/np).
    """
    if method not in ADJUSTMENTS:
        raise InputError(f"Unknown adjustment '{method}'; expected one of {', '.join(ADJUSTMENTS)}")
    p = np.asarray(p_values, dtype=float)
    matrix = p.reshape(p.shape[0], -1) if p.ndim > 1 else p.reshape(-1, 1)

    if method == "fb":
        if context is None:
            raise InputError("The fb adjustment needs the fit's effective number of parameters")
        adjusted = np.minimum(matrix * context.fb_factor, 1.0)
    elif family == "all":
        adjusted = _adjust_vector(matrix.reshape(-1), method).reshape(matrix.shape)
    elif family == "coefficient":
        adjusted = np.column_stack([_adjust_vector(matrix[:, k], method) for k in range(matrix.shape[1])])
    else:
        raise InputError(f"Unknown adjustment family '{family}'")
    return adjusted.reshape(p.shape)


@dataclass
class AdjustedPValues:
    """Raw and adjusted p-value surfaces for every coefficient"""
    names: List[str]
    p_original: np.ndarray
    p_bh: np.ndarray
    p_by: np.ndarray
    p_bonferroni: np.ndarray
    p_fb: np.ndarray
    context: FitContext
    family: str = "coefficient"

    def fb_alpha(self, xi: float = 0.05) -> float:
        """Per-test significance level equivalent to the fb adjustment"""
        return xi / self.context.fb_factor

    def method(self, name: str) -> np.ndarray:
        return {
            'none': self.p_original,
            'bh': self.p_bh,
            'by': self.p_by,
            'bonferroni': self.p_bonferroni,
            'fb': self.p_fb
        }[name]

    def significant(self, method: str, alpha: float = 0.05) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.method(method) <= alpha

    def to_columns(self) -> Dict[str, np.ndarray]:
        columns: Dict[str, np.ndarray] = {}
        suffixes = [("p", self.p_original), ("p_bh", self.p_bh), ("p_by", self.p_by),
                    ("p_bo", self.p_bonferroni), ("p_fb", self.p_fb)]
        for suffix, matrix in suffixes:
            for k, name in enumerate(self.names):
                columns[f"{name}_{suffix}"] = matrix[:, k]
        return columns


def adjusted_p_values(fit: GwrFit, family: Literal["coefficient", "all"] = "coefficient") -> AdjustedPValues:
    """All four adjustments of a fit's pseudo t-value p-values"""
    p = t_to_p(fit.t_values)
    context = FitContext.from_fit(fit)
    return AdjustedPValues(
        names=list(fit.names),
        p_original=p,
        p_bh=adjust(p, "bh", family=family),
        p_by=adjust(p, "by", family=family),
        p_bonferroni=adjust(p, "bonferroni", family=family),
        p_fb=adjust(p, "fb", context=context),
        context=context,
        family=family
    )


@dataclass
class CollinearityReport:
    """Local predictor correlations, VIFs, condition numbers and variance decomposition proportions"""
    predictors: List[str]
    terms: List[str]
    correlations: np.ndarray
    vif: np.ndarray
    condition_numbers: np.ndarray
    vdp: np.ndarray
    vif_singular: np.ndarray

    @property
    def correlation_flags(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.abs(self.correlations) > CORRELATION_THRESHOLD

    @property
    def vif_flags(self) -> np.ndarray:
        return self.vif > VIF_THRESHOLD

    @property
    def cn_flags(self) -> np.ndarray:
        return self.condition_numbers > CN_THRESHOLD

    @property
    def vdp_flags(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.vdp > VDP_THRESHOLD

    def to_columns(self) -> Dict[str, np.ndarray]:
        columns: Dict[str, np.ndarray] = {}
        for k, pair in enumerate(pair_labels(self.predictors)):
            columns[f"Corr_{pair}"] = self.correlations[:, k]
        for k, name in enumerate(self.predictors):
            columns[f"{name}_VIF"] = self.vif[:, k]
        columns['local_CN'] = self.condition_numbers
        # proportions on the component with the smallest singular value
        for k, name in enumerate(self.terms):
            columns[f"{name}_VDP"] = self.vdp[:, -1, k]
        return columns

    def flag_counts(self) -> Dict[str, int]:
        return {
            'correlation': int(np.count_nonzero(self.correlation_flags)),
            'vif': int(np.count_nonzero(self.vif_flags)),
            'cn': int(np.count_nonzero(self.cn_flags)),
            'vdp': int(np.count_nonzero(self.vdp_flags))
        }


def _local_correlation(cov: np.ndarray) -> np.ndarray:
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(sd, sd)
    return np.clip(corr, -1.0, 1.0)


def _vif(corr: np.ndarray) -> Optional[np.ndarray]:
    if not np.all(np.isfinite(corr)):
        return None
    try:
        if np.linalg.cond(corr) > 1e12:
            return None
        return np.diag(np.linalg.inv(corr))
    except np.linalg.LinAlgError:
        return None


def _condition(X: np.ndarray, w: np.ndarray):
    Xs = X * np.sqrt(w)[:, np.newaxis]
    norms = np.linalg.norm(Xs, axis=0)
    norms[norms == 0.0] = 1.0
    _, s, Vt = np.linalg.svd(Xs / norms, full_matrices=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        cn = s[0] / s[-1] if s[-1] > 0.0 else np.inf
        phi = (Vt.T ** 2) / s[np.newaxis, :] ** 2
        proportions = (phi / phi.sum(axis=1, keepdims=True)).T
    if not s[-1] > 0.0:
        proportions = np.full_like(proportions, np.nan)
    return float(cn), proportions


def collinearity_diagnostics(
    data: Dataset,
    predictors: Sequence[str],
    kernel: KernelSpec,
    metric: DistanceMetric,
    dmat: Optional[np.ndarray] = None,
    intercept: bool = True
) -> CollinearityReport:
    """Local collinearity diagnostics at every observation location"""
    predictors = list(predictors)
    X, terms = design_matrix(data, predictors, intercept)
    values = data.columns(predictors)
    if dmat is None:
        dmat = distance_matrix(data.points, metric)
    weights = weight_matrix(dmat, kernel)
    n, q, p = data.n, len(predictors), X.shape[1]
    pairs = list(combinations(range(q), 2))

    correlations = np.empty((n, len(pairs)))
    vif = np.empty((n, q))
    singular = np.zeros(n, dtype=bool)
    condition_numbers = np.empty(n)
    vdp = np.empty((n, p, p))

    for i in range(n):
        _, cov = local_moments(values, weights[i], i)
        corr = _local_correlation(cov)
        for k, (a, b) in enumerate(pairs):
            correlations[i, k] = corr[a, b]
        local_vif = _vif(corr)
        if local_vif is None:
            vif[i] = np.inf
            singular[i] = True
        else:
            vif[i] = local_vif
        condition_numbers[i], vdp[i] = _condition(X, weights[i])

    if singular.any():
        logger.warning(
            f"Local predictor correlation matrix singular at {int(singular.sum())} location(s); VIF set to inf"
        )

    return CollinearityReport(
        predictors=predictors,
        terms=terms,
        correlations=correlations,
        vif=vif,
        condition_numbers=condition_numbers,
        vdp=vdp,
        vif_singular=singular
    )
