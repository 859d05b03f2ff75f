"""
GeoWeight command line
Geographically weighted summary statistics, PCA, regression and discriminant
analysis for point data in CSV files
"""

import sys
import os
sys.path.append(os.path.join(os.path.dirname(__file__), '..', '..', '..'))

import time
import logging
from typing import Any, Callable, Dict, List, Optional

import click
import structlog

from shared.config.settings import (
    RunConfig, Settings, create_run_config, load_run_file, load_settings
)
from shared.utils.errors import ConfigurationError, InputError, NumericalError
from shared.utils.metrics import get_metrics
from cli.apps.gw_cli.commands import COMMANDS, RunContext

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def configure_logging(settings: Settings):
    """Structured logs on standard error; library modules log through stdlib logging"""
    renderer = (
        structlog.processors.JSONRenderer() if settings.log_format == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    logging.basicConfig(level=settings.log_level, stream=sys.stderr, format="%(message)s", force=True)
    structlog.configure(
        processors=[
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="ISO"),
            renderer
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=False,
    )


def run(config: RunConfig, settings: Optional[Settings] = None) -> int:
    """Run one validated configuration and return the process exit code"""
    settings = settings or load_settings()
    metrics = get_metrics()
    started = time.time()
    logger.info("run_config", **config.summary())

    code = EXIT_OK
    try:
        facts = COMMANDS[config.subcommand](RunContext(config, settings))
        logger.info(
            "run_complete",
            subcommand=config.subcommand,
            seed=config.seed,
            metric={'p': config.p, 'theta': config.theta, 'geodesic': config.geodesic},
            **facts
        )
    except InputError as e:
        logger.error("input_error", subcommand=config.subcommand, error=str(e))
        click.echo(f"error: {e}", err=True)
        code = EXIT_INPUT
    except NumericalError as e:
        logger.error("numerical_error", subcommand=config.subcommand, error=str(e))
        click.echo(f"numerical failure: {e}", err=True)
        code = EXIT_NUMERICAL

    metrics.observe_run(config.subcommand, time.time() - started)
    metrics_file = config.metrics_file or settings.metrics_file
    if metrics_file:
        metrics.write_textfile(str(metrics_file))
    return code


def _split(values) -> Optional[List[str]]:
    """Repeatable, comma-separable option values"""
    if not values:
        return None
    items = [v.strip() for value in values for v in str(value).split(",")]
    return [v for v in items if v]


def _grid(text: Optional[str]) -> Optional[List[float]]:
    if not text:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"--profile-grid must be comma-separated numbers, got '{text}'")


OPTIONS: Dict[str, Callable] = {
    'response': click.option("--response", help="Dependent variable"),
    'global_vars': click.option("--global-var", "global_vars", multiple=True,
                                help="Variable with a constant (global) coefficient; repeat or comma-separate"),
    'intercept_fixed': click.option("--intercept-fixed/--intercept-local", default=None,
                                    help="Treat the intercept as global in the mixed model"),
    'label_col': click.option("--label", "label_col", help="Categorical class column"),
    'winner_share': click.option("--winner-share",
                                 help="Winning vote share column (percent); derives classes with --winner"),
    'winner': click.option("--winner", help="Winner label column; shares in [45, 55] become Borderline"),
    'components': click.option("--components", type=int, help="Number of principal components"),
    'standardize': click.option("--standardize/--no-standardize", default=None,
                                help="Standardise variables globally before PCA"),
    'objective': click.option("--objective", type=click.Choice(["aicc", "cv"]), help="Bandwidth objective"),
    'method': click.option("--method", type=click.Choice(["lda", "qda"]), help="Discriminant rule"),
    'family': click.option("--family", type=click.Choice(["coefficient", "all"]),
                           help="Multiple-testing family"),
    'model': click.option("--model", type=click.Choice(["gwss", "gwpca", "gwr", "gwda"]), help="Model to test or tune"),
    'nsim': click.option("--nsim", type=int, help="Number of Monte Carlo simulations"),
    'seed': click.option("--seed", type=int, help="Random seed"),
    'alpha': click.option("--alpha", type=float, help="Significance level"),
    'reoptimize': click.option("--reoptimize/--no-reoptimize", default=None,
                               help="Re-select the GW PCA bandwidth in every simulation"),
    'profile_output': click.option("--profile-output", type=click.Path(dir_okay=False),
                                   help="Write the bandwidth profile to this CSV"),
    'profile_grid': click.option("--profile-grid", help="Comma-separated bandwidths to profile"),
}

COMMON = [
    click.option("--input", "input_path", type=click.Path(dir_okay=False), help="Input CSV with a header row"),
    click.option("--config", "config_file", type=click.Path(dir_okay=False), help="YAML run file of default options"),
    click.option("--x-col", help="X / longitude column (default X)"),
    click.option("--y-col", help="Y / latitude column (default Y)"),
    click.option("--var", "variables", multiple=True, help="Analysis variable(s); repeat or comma-separate"),
    click.option("--kernel", type=click.Choice(["boxcar", "bisquare", "tricube", "gaussian", "exponential"])),
    click.option("--bw", "--bandwidth", "bandwidth", help="Bandwidth value or 'auto'"),
    click.option("--adaptive/--fixed", default=None, help="Neighbour-count or distance bandwidth"),
    click.option("--p", "p", type=float, help="Minkowski power (default 2)"),
    click.option("--theta", type=float, help="Axis rotation in radians"),
    click.option("--geodesic/--projected", default=None, help="Great-circle distances on lon/lat"),
    click.option("--output", type=click.Path(dir_okay=False), help="Result file"),
    click.option("--format", "output_format", type=click.Choice(["csv", "geojson"])),
    click.option("--metrics-file", type=click.Path(dir_okay=False), help="Prometheus textfile"),
]


def with_options(*names: str):
    """Attach the common options plus the named model options"""
    def decorator(f):
        for option in reversed(COMMON + [OPTIONS[n] for n in names]):
            f = option(f)
        return f
    return decorator


def _execute(ctx: click.Context, subcommand: str, config_file: Optional[str], **options: Any):
    settings: Settings = ctx.obj['settings']
    try:
        for key in ("variables", "global_vars"):
            if key in options:
                options[key] = _split(options[key])
        if "profile_grid" in options:
            options["profile_grid"] = _grid(options["profile_grid"])
        config = create_run_config(load_run_file(config_file), subcommand=subcommand, **options)
    except InputError as e:
        logger.error("configuration_error", subcommand=subcommand, error=str(e))
        click.echo(f"error: {e}", err=True)
        ctx.exit(EXIT_INPUT)
        return
    ctx.exit(run(config, settings))


@click.group(context_settings={'help_option_names': ['-h', '--help']})
@click.option("--env-file", type=click.Path(dir_okay=False), default=None, help="Environment file to load")
@click.pass_context
def cli(ctx: click.Context, env_file: Optional[str]):
    """GeoWeight: geographically weighted models for point data"""
    try:
        settings = load_settings(env_file)
    except ConfigurationError as e:
        click.echo(f"error: {e}", err=True)
        ctx.exit(EXIT_INPUT)
        return
    configure_logging(settings)
    ctx.ensure_object(dict)['settings'] = settings


@cli.command("dist")
@with_options()
@click.pass_context
def dist_command(ctx, config_file, **options):
    """Distance matrix between all locations"""
    _execute(ctx, "dist", config_file, **options)


@cli.command("gwss")
@with_options()
@click.pass_context
def gwss_command(ctx, config_file, **options):
    """GW means, standard deviations, covariances and correlations"""
    _execute(ctx, "gwss", config_file, **options)


@cli.command("gwpca")
@with_options("components", "standardize")
@click.pass_context
def gwpca_command(ctx, config_file, **options):
    """GW principal components analysis"""
    _execute(ctx, "gwpca", config_file, **options)


@cli.command("gwr")
@with_options("response", "objective", "family", "alpha")
@click.pass_context
def gwr_command(ctx, config_file, **options):
    """Basic GW regression with adjusted pseudo t-value p-values"""
    _execute(ctx, "gwr", config_file, **options)


@cli.command("gwr-mixed")
@with_options("response", "global_vars", "intercept_fixed", "objective")
@click.pass_context
def gwr_mixed_command(ctx, config_file, **options):
    """Mixed GW regression with global and local terms"""
    _execute(ctx, "gwr-mixed", config_file, **options)


@cli.command("gwr-hetero")
@with_options("response", "objective")
@click.pass_context
def gwr_hetero_command(ctx, config_file, **options):
    """Heteroskedastic GW regression"""
    _execute(ctx, "gwr-hetero", config_file, **options)


@cli.command("gwda")
@with_options("label_col", "winner_share", "winner", "method")
@click.pass_context
def gwda_command(ctx, config_file, **options):
    """GW discriminant analysis with a confusion matrix"""
    _execute(ctx, "gwda", config_file, **options)


@cli.command("bw")
@with_options("model", "response", "objective", "components", "standardize", "label_col", "winner_share",
              "winner", "method", "profile_output", "profile_grid")
@click.pass_context
def bw_command(ctx, config_file, **options):
    """Optimal bandwidth, with an optional objective profile"""
    _execute(ctx, "bw", config_file, **options)


@cli.command("mc")
@with_options("model", "response", "objective", "components", "standardize", "nsim", "seed", "alpha",
              "reoptimize")
@click.pass_context
def mc_command(ctx, config_file, **options):
    """Monte Carlo tests for spatial non-stationarity"""
    _execute(ctx, "mc", config_file, **options)


@cli.command("diag")
@with_options("response", "objective")
@click.pass_context
def diag_command(ctx, config_file, **options):
    """Local collinearity diagnostics"""
    _execute(ctx, "diag", config_file, **options)


def main():
    cli(prog_name="geoweight")


if __name__ == "__main__":
    main()
