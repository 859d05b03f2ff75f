"""
Monte Carlo permutation machinery shared by the non-stationarity tests
Each simulation index gets its own RNG substream so serial and threaded
runs produce identical results
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

import numpy as np

from shared.utils.errors import ConfigurationError, InputError
from shared.utils.metrics import get_metrics

logger = logging.getLogger(__name__)

T = TypeVar("T")

# values within this relative distance of the true statistic count as ties
TIE_TOLERANCE = 1e-10


def spawn_generators(seed: int, nsim: int) -> List[np.random.Generator]:
    """One independent generator per simulation index"""
    children = np.random.SeedSequence(seed).spawn(nsim)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def run_simulations(
    simulate: Callable[[int, np.random.Generator], T],
    nsim: int,
    seed: int,
    threads: int = 1,
    test_name: str = "montecarlo"
) -> List[T]:
    """Run simulate(index, rng) for every simulation, results ordered by index"""
    if nsim < 1:
        raise InputError(f"nsim must be at least 1, got {nsim}")
    generators = spawn_generators(seed, nsim)
    metrics = get_metrics()

    def _one(index: int) -> T:
        result = simulate(index, generators[index])
        metrics.record_simulation(test_name)
        return result

    if threads <= 1:
        return [_one(i) for i in range(nsim)]

    logger.debug(f"Running {nsim} simulations of {test_name} on {threads} threads")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_one, range(nsim)))


def minimum_simulations(alpha: float) -> int:
    """Smallest nsim for which a tail of size alpha can be resolved"""
    return int(round(1.0 / alpha)) - 1


def check_simulation_count(nsim: int, alpha: float, two_tailed: bool = False):
    """Reject simulation counts too small for the requested significance level"""
    needed = minimum_simulations(alpha)
    if nsim < needed:
        raise ConfigurationError(
            f"nsim={nsim} cannot resolve tails at alpha={alpha}; use at least {needed} simulations"
        )
    if two_tailed:
        per_tail = minimum_simulations(alpha / 2.0)
        if nsim < per_tail:
            logger.warning(
                f"nsim={nsim} cannot reach a pseudo p-value of alpha/2={alpha / 2.0:g}; "
                f"no location can be flagged below {per_tail} simulations"
            )


def _tolerance(true: np.ndarray) -> np.ndarray:
    return TIE_TOLERANCE * np.maximum(np.abs(true), 1.0)


def lower_tail_p(true: np.ndarray, simulated: np.ndarray) -> np.ndarray:
    """(1 + #{sim <= true}) / (nsim + 1); simulated has the simulation axis first"""
    true = np.asarray(true, dtype=float)
    simulated = np.asarray(simulated, dtype=float)
    nsim = simulated.shape[0]
    count = np.sum(simulated <= true + _tolerance(true), axis=0)
    p = (1.0 + count) / (nsim + 1.0)
    return np.where(np.isnan(true), np.nan, p)


def upper_tail_p(true: np.ndarray, simulated: np.ndarray) -> np.ndarray:
    """(1 + #{sim >= true}) / (nsim + 1); simulated has the simulation axis first"""
    true = np.asarray(true, dtype=float)
    simulated = np.asarray(simulated, dtype=float)
    nsim = simulated.shape[0]
    count = np.sum(simulated >= true - _tolerance(true), axis=0)
    p = (1.0 + count) / (nsim + 1.0)
    return np.where(np.isnan(true), np.nan, p)


def two_tailed_flags(lower_p: np.ndarray, upper_p: np.ndarray, alpha: float) -> np.ndarray:
    """True where the true value sits in either alpha/2 tail"""
    half = alpha / 2.0
    with np.errstate(invalid="ignore"):
        flags = (lower_p <= half) | (upper_p <= half)
    return np.where(np.isnan(lower_p) | np.isnan(upper_p), False, flags)


def resolve_threads(threads: Optional[int]) -> int:
    """Thread count from an explicit value or the GW_THREADS setting"""
    if threads is not None:
        return max(1, int(threads))
    from shared.config.settings import load_settings
    return load_settings().threads
