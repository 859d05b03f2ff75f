"""
Subcommand handlers for the GeoWeight command line
Each handler runs one analysis for a validated RunConfig and returns the
facts needed to reproduce it
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import click
import numpy as np
import structlog

from shared.bandwidth.search import SearchResult, default_bounds, grid_profile
from shared.bandwidth.selectors import (
    bw_gwda, bw_gwpca, bw_gwr, gwda_objective, gwpca_objective, gwr_objective
)
from shared.config.settings import RunConfig, Settings
from shared.data.dataset import Dataset
from shared.data.export import write_results, write_table
from shared.data.loaders import derive_election_classes, load_csv
from shared.regression.basic import fit_report, five_number_summary, gwr_basic, montecarlo_gwr
from shared.regression.extensions import compare_local_variability, gwr_hetero, gwr_mixed
from shared.regression.inference import adjusted_p_values, collinearity_diagnostics
from shared.spatial.kernel import DistanceMetric, KernelSpec, create_kernel, distance_matrix
from shared.stats.discriminant import (
    GwdaSpec, classification_rate, confusion_matrix, global_fit_predict, gwda_fit_predict
)
from shared.stats.pca import gwpca, montecarlo_gwpca, standardize_global
from shared.stats.summary import global_statistics, gwss, montecarlo_gwss
from shared.utils.errors import ConfigurationError

logger = structlog.get_logger(__name__)

PROFILE_POINTS = 20
ELECTION_CLASS = "class"


@dataclass
class RunContext:
    """Loaded data, geometry and settings shared by one run"""
    config: RunConfig
    settings: Settings
    _data: Optional[Dataset] = None
    _dmat: Optional[np.ndarray] = None
    _label_derived: bool = False
    facts: Dict[str, Any] = field(default_factory=dict)

    @property
    def metric(self) -> DistanceMetric:
        return DistanceMetric(p=self.config.p, theta=self.config.theta, geodesic=self.config.geodesic)

    @property
    def data(self) -> Dataset:
        if self._data is None:
            config = self.config
            self._data = load_csv(
                config.input_path,
                config.x_col,
                config.y_col,
                variables=self._numeric_columns(),
                label_cols=self._label_columns(),
                geodesic=config.geodesic
            )
        return self._data

    def _numeric_columns(self) -> Optional[List[str]]:
        """Columns to load as numbers; None loads every non-coordinate, non-label column"""
        config = self.config
        if config.subcommand == "dist":
            return []
        if not config.variables:
            return None
        return [c for c in config.referenced_columns() if c not in (config.label_col, config.winner)]

    def _label_columns(self) -> List[str]:
        if self.config.winner:
            return [self.config.winner]
        return [self.config.label_col] if self.config.label_col else []

    @property
    def dmat(self) -> np.ndarray:
        if self._dmat is None:
            self._dmat = distance_matrix(self.data.points, self.metric)
        return self._dmat

    def variables(self, exclude: Optional[List[str]] = None) -> List[str]:
        """Selected variables, or every numeric column not otherwise in use"""
        if self.config.variables:
            return list(self.config.variables)
        exclude = set(exclude or [])
        return [n for n in self.data.names if n not in exclude]

    def response(self) -> str:
        if not self.config.response:
            raise ConfigurationError(f"'{self.config.subcommand}' needs --response")
        return self.config.response

    def label(self) -> str:
        """Class column, derived from the winning share and winner when those are given"""
        config = self.config
        if config.winner:
            name = config.label_col or ELECTION_CLASS
            if not self._label_derived:
                classes = derive_election_classes(
                    self.data.column(config.winner_share), self.data.label(config.winner)
                )
                self._data = self.data.with_label(name, classes)
                self._label_derived = True
            return name
        if not config.label_col:
            raise ConfigurationError(f"'{config.subcommand}' needs --label, or --winner-share with --winner")
        return config.label_col

    def class_predictors(self) -> List[str]:
        return self.variables(exclude=[self.config.winner_share])

    def kernel(self, search: Optional[Callable[[], SearchResult]] = None) -> KernelSpec:
        """Explicit bandwidth, or the optimum of the model's bandwidth objective"""
        config = self.config
        if config.auto_bandwidth:
            if search is None:
                raise ConfigurationError(f"'{config.subcommand}' has no bandwidth objective; give --bw")
            result = search()
            click.echo(result.describe())
            logger.info("bandwidth_selected", bandwidth=result.bandwidth, score=result.score,
                        evaluations=len(result.evaluations), multiple_minima=result.multiple_minima)
            kernel = create_kernel(config.kernel, result.bandwidth, config.adaptive)
        else:
            kernel = create_kernel(config.kernel, config.bandwidth, config.adaptive)
        self.facts['bandwidth'] = kernel.bandwidth
        self.facts['kernel'] = kernel.to_dict()
        return kernel

    def write(self, result: Any):
        if self.config.output is not None:
            write_results(
                result, self.config.output, self.data.coords, self.config.output_format,
                (self.config.x_col, self.config.y_col)
            )
            self.facts['output'] = str(self.config.output)

    def write_table(self, columns: Dict[str, Any], suffix: str = ""):
        if self.config.output is not None:
            path = Path(self.config.output)
            if suffix:
                path = path.with_name(f"{path.stem}_{suffix}.csv")
            write_table(columns, path)


def _gwr_search(ctx: RunContext, predictors: List[str]) -> Callable[[], SearchResult]:
    config = ctx.config
    return lambda: bw_gwr(
        ctx.data, ctx.response(), predictors, config.kernel, config.adaptive, ctx.metric,
        objective=config.objective, dmat=ctx.dmat
    )


def _pca_data(ctx: RunContext) -> Dataset:
    data = ctx.data.select(ctx.variables())
    return standardize_global(data) if ctx.config.standardize else data


def _components(ctx: RunContext, m: int) -> int:
    if ctx.config.components is not None:
        return ctx.config.components
    return min(3, max(1, m - 1))


def run_dist(ctx: RunContext) -> Dict[str, Any]:
    dmat = ctx.dmat
    n = dmat.shape[0]
    click.echo(f"distances: {n} x {n}, maximum {float(np.max(dmat)):.6g}")
    ctx.write_table({str(j): dmat[:, j] for j in range(n)})
    return ctx.facts


def run_gwss(ctx: RunContext) -> Dict[str, Any]:
    variables = ctx.variables()
    kernel = ctx.kernel()
    for name, value in global_statistics(ctx.data, variables).items():
        click.echo(f"global {name}: {value:.6g}")
    result = gwss(ctx.data, variables, kernel, ctx.metric, ctx.dmat)
    ctx.write(result)
    return ctx.facts


def run_gwpca(ctx: RunContext) -> Dict[str, Any]:
    data = _pca_data(ctx)
    k = _components(ctx, data.m)
    config = ctx.config
    kernel = ctx.kernel(lambda: bw_gwpca(data, k, config.kernel, config.adaptive, ctx.metric, dmat=ctx.dmat))
    result = gwpca(data, kernel, ctx.metric, k, ctx.dmat)
    labels = [f"PTV_{c + 1}" for c in range(k)] + [f"PTV_1_to_{k}"]
    surfaces = np.column_stack([result.ptv[:, :k], result.cumulative_ptv(k)])
    click.echo(five_number_summary(labels, surfaces).format_report("Summary of local PTV:"))
    ctx.write(result)
    ctx.write_table(result.loadings_table(), "loadings")
    ctx.facts['components'] = k
    return ctx.facts


def run_gwr(ctx: RunContext) -> Dict[str, Any]:
    response = ctx.response()
    predictors = ctx.variables(exclude=[response])
    kernel = ctx.kernel(_gwr_search(ctx, predictors))
    fit = gwr_basic(ctx.data, response, predictors, kernel, ctx.metric, ctx.dmat)
    adjusted = adjusted_p_values(fit, ctx.config.family)
    click.echo(fit_report(fit))
    click.echo(f"fb significance level at alpha {ctx.config.alpha}: {adjusted.fb_alpha(ctx.config.alpha):.6g}")
    columns = fit.to_columns()
    columns.update(adjusted.to_columns())
    ctx.write(columns)
    ctx.facts['aicc'] = fit.aicc
    return ctx.facts


def run_gwr_mixed(ctx: RunContext) -> Dict[str, Any]:
    response = ctx.response()
    global_vars = list(ctx.config.global_vars)
    local_vars = ctx.variables(exclude=[response] + global_vars)
    kernel = ctx.kernel(_gwr_search(ctx, local_vars + global_vars))
    mixed = gwr_mixed(
        ctx.data, response, local_vars, global_vars, kernel, ctx.metric,
        intercept_fixed=ctx.config.intercept_fixed, dmat=ctx.dmat
    )
    click.echo(mixed.format_report())
    basic = gwr_basic(ctx.data, response, local_vars + global_vars, kernel, ctx.metric, ctx.dmat)
    compare_local_variability(mixed, basic)
    ctx.write(mixed)
    ctx.facts['converged'] = mixed.converged
    ctx.facts['iterations'] = mixed.iterations
    return ctx.facts


def run_gwr_hetero(ctx: RunContext) -> Dict[str, Any]:
    response = ctx.response()
    predictors = ctx.variables(exclude=[response])
    kernel = ctx.kernel(_gwr_search(ctx, predictors))
    fit = gwr_hetero(ctx.data, response, predictors, kernel, ctx.metric, ctx.dmat)
    click.echo(five_number_summary(fit.names, fit.coefficients).format_report(
        "Summary of heteroskedastic GWR coefficient estimates:"
    ))
    status = "converged" if fit.converged else "did not converge"
    click.echo(f"Iterations: {fit.iterations} ({status})")
    ctx.write(fit)
    ctx.facts['converged'] = fit.converged
    return ctx.facts


def run_gwda(ctx: RunContext) -> Dict[str, Any]:
    label = ctx.label()
    predictors = ctx.class_predictors()
    spec = GwdaSpec(method=ctx.config.method)
    config = ctx.config
    kernel = ctx.kernel(lambda: bw_gwda(
        ctx.data, label, predictors, spec, config.kernel, config.adaptive, ctx.metric, dmat=ctx.dmat
    ))
    actual = ctx.data.label(label)
    global_rate = classification_rate(confusion_matrix(actual, global_fit_predict(ctx.data, label, predictors, spec).predicted))
    result = gwda_fit_predict(ctx.data, label, predictors, spec, kernel, ctx.metric, ctx.dmat)
    matrix = confusion_matrix(actual, result.predicted, result.classes)
    click.echo(f"Global DA correct classification rate: {global_rate:.4f}")
    click.echo("GW DA confusion matrix (predicted rows, actual columns):")
    click.echo(matrix.format_report())
    columns = {'actual': actual}
    columns.update(result.to_columns())
    ctx.write(columns)
    ctx.facts['classification_rate'] = classification_rate(matrix)
    return ctx.facts


def _bandwidth_objective(ctx: RunContext):
    """(objective, label, minimum neighbours, searcher) for the configured model"""
    config, metric, dmat = ctx.config, ctx.metric, ctx.dmat
    if config.model == "gwr":
        response = ctx.response()
        predictors = ctx.variables(exclude=[response])
        objective = gwr_objective(ctx.data, response, predictors, config.kernel, config.adaptive,
                                  metric, config.objective, dmat)
        return objective, f"gwr_{config.objective}", 2 * (len(predictors) + 2), _gwr_search(ctx, predictors)
    if config.model == "gwpca":
        data = _pca_data(ctx)
        k = _components(ctx, data.m)
        objective = gwpca_objective(data, k, config.kernel, config.adaptive, metric, dmat)
        return objective, "gwpca_cv", k + 2, lambda: bw_gwpca(data, k, config.kernel, config.adaptive, metric, dmat=dmat)
    if config.model == "gwda":
        label = ctx.label()
        predictors = ctx.class_predictors()
        spec = GwdaSpec(method=config.method)
        objective = gwda_objective(ctx.data, label, predictors, spec, config.kernel, config.adaptive, metric, dmat)
        return objective, "gwda_cv", 2 * (len(predictors) + 1), lambda: bw_gwda(
            ctx.data, label, predictors, spec, config.kernel, config.adaptive, metric, dmat=dmat
        )
    raise ConfigurationError(f"Model '{config.model}' has no bandwidth objective")


def run_bw(ctx: RunContext) -> Dict[str, Any]:
    config = ctx.config
    objective, label, min_neighbours, search = _bandwidth_objective(ctx)
    result = search()
    click.echo(result.describe())
    ctx.facts['bandwidth'] = result.bandwidth
    ctx.facts['score'] = result.score

    if config.profile_output is not None:
        if config.profile_grid:
            grid = list(config.profile_grid)
        else:
            lower, upper = default_bounds(ctx.dmat, config.adaptive, min_neighbours)
            grid = list(np.linspace(lower, upper, PROFILE_POINTS))
        profile = grid_profile(objective, grid, config.adaptive, label=label, threads=ctx.settings.threads)
        write_table(profile.to_columns(), config.profile_output)
        ctx.facts['profile'] = str(config.profile_output)
    return ctx.facts


def run_mc(ctx: RunContext) -> Dict[str, Any]:
    config = ctx.config
    if config.nsim < 1:
        raise ConfigurationError("'mc' needs --nsim of at least 1 and a --seed")
    threads = ctx.settings.threads

    if config.model == "gwss":
        variables = ctx.variables()
        report = montecarlo_gwss(ctx.data, variables, ctx.kernel(), ctx.metric, config.nsim, config.seed,
                                 config.alpha, threads, ctx.dmat)
        for k, label in enumerate(report.labels):
            click.echo(f"{label}: significant at {int(report.flags[:, k].sum())} of {ctx.data.n} locations")
        ctx.write(report)
    elif config.model == "gwpca":
        data = _pca_data(ctx)
        k = _components(ctx, data.m)
        kernel = ctx.kernel(lambda: bw_gwpca(data, k, config.kernel, config.adaptive, ctx.metric, dmat=ctx.dmat))
        report = montecarlo_gwpca(data, kernel, ctx.metric, k, config.nsim, config.seed, config.reoptimize,
                                  alpha=config.alpha, threads=threads, dmat=ctx.dmat)
        click.echo(f"eigenvalue SD of component {report.component}: {report.statistic:.6g}, p-value {report.p_value:.4f}")
        ctx.write_table(report.to_columns())
    elif config.model == "gwr":
        response = ctx.response()
        predictors = ctx.variables(exclude=[response])
        kernel = ctx.kernel(_gwr_search(ctx, predictors))
        report = montecarlo_gwr(ctx.data, response, predictors, kernel, ctx.metric, config.nsim, config.seed,
                                config.alpha, threads, ctx.dmat)
        click.echo(report.format_report())
        ctx.write_table(report.to_columns())
    else:
        raise ConfigurationError(f"No Monte Carlo test for model '{config.model}'")
    ctx.facts['nsim'] = config.nsim
    return ctx.facts


def run_diag(ctx: RunContext) -> Dict[str, Any]:
    exclude = [ctx.config.response] if ctx.config.response else []
    predictors = ctx.variables(exclude=exclude)
    kernel = ctx.kernel(_gwr_search(ctx, predictors) if ctx.config.response else None)
    report = collinearity_diagnostics(ctx.data, predictors, kernel, ctx.metric, ctx.dmat)
    for name, count in report.flag_counts().items():
        click.echo(f"{name} flags: {count}")
    ctx.write(report)
    return ctx.facts


COMMANDS: Dict[str, Callable[[RunContext], Dict[str, Any]]] = {
    'dist': run_dist,
    'gwss': run_gwss,
    'gwpca': run_gwpca,
    'gwr': run_gwr,
    'gwr-mixed': run_gwr_mixed,
    'gwr-hetero': run_gwr_hetero,
    'gwda': run_gwda,
    'bw': run_bw,
    'mc': run_mc,
    'diag': run_diag,
}
