"""
Bandwidth optimisation and profiling
Golden-section minimisation and grid profiles for any bandwidth objective
(CV score or AICc); objectives signal unusable bandwidths with math.inf
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from shared.utils.errors import InputError, NoValidBandwidthError
from shared.utils.metrics import get_metrics

logger = logging.getLogger(__name__)

Bandwidth = Union[int, float]
Objective = Callable[[Bandwidth], float]

GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0
MINIMA_GRID_POINTS = 10


@dataclass
class SearchResult:
    """Outcome of a golden-section search"""
    bandwidth: Bandwidth
    score: float
    adaptive: bool
    evaluations: Dict[Bandwidth, float] = field(default_factory=dict)
    multiple_minima: bool = False

    def history(self) -> List[Tuple[Bandwidth, float]]:
        """Evaluated (bandwidth, score) pairs in bandwidth order"""
        return sorted(self.evaluations.items())

    def describe(self) -> str:
        mode = "adaptive" if self.adaptive else "fixed"
        return f"bandwidth: {self.bandwidth} ({mode})"


@dataclass
class BandwidthProfile:
    """Objective values over a list of bandwidths"""
    bandwidths: np.ndarray
    scores: np.ndarray
    label: str
    adaptive: bool

    @property
    def argmin(self) -> Optional[Bandwidth]:
        """Smallest bandwidth attaining the minimum score, None when all are infinite"""
        finite = np.isfinite(self.scores)
        if not finite.any():
            return None
        best = np.min(self.scores[finite])
        index = int(np.flatnonzero(self.scores == best)[0])
        value = self.bandwidths[index]
        return int(value) if self.adaptive else float(value)

    def to_columns(self) -> Dict[str, np.ndarray]:
        return {'bandwidth': self.bandwidths, self.label: self.scores}


class _MemoObjective:
    """Caches objective evaluations keyed by the (rounded) bandwidth"""

    def __init__(self, objective: Objective, adaptive: bool, label: str):
        self.objective = objective
        self.adaptive = adaptive
        self.label = label
        self.cache: Dict[Bandwidth, float] = {}
        self._metrics = get_metrics()

    def key(self, bandwidth: float) -> Bandwidth:
        return int(round(bandwidth)) if self.adaptive else float(bandwidth)

    def __call__(self, bandwidth: float) -> float:
        key = self.key(bandwidth)
        if key not in self.cache:
            score = float(self.objective(key))
            if math.isnan(score):
                score = math.inf
            self.cache[key] = score
            self._metrics.record_bandwidth_evaluation(self.label)
            logger.debug(f"{self.label}({key}) = {score}")
        return self.cache[key]

    def best(self) -> Tuple[Bandwidth, float]:
        """Lowest score, ties broken toward the smaller bandwidth"""
        return min(self.cache.items(), key=lambda item: (item[1], item[0]))


def _minima_grid(lower: float, upper: float, adaptive: bool) -> List[Bandwidth]:
    points = np.linspace(lower, upper, MINIMA_GRID_POINTS)
    if adaptive:
        return sorted({int(round(p)) for p in points})
    return [float(p) for p in points]


def golden_section(
    objective: Objective,
    lower: Bandwidth,
    upper: Bandwidth,
    adaptive: bool,
    tolerance: float = 1e-5,
    max_iter: int = 200,
    label: str = "objective",
    check_minima: bool = True
) -> SearchResult:
    """
    Minimise a bandwidth objective over [lower, upper]

    Adaptive mode works on integer neighbour counts: probes are rounded and the
    final bracket (width <= 3) is searched exhaustively. Fixed mode stops when
    the bracket is within a relative tolerance.
    """
    if adaptive:
        lower, upper = int(math.ceil(lower)), int(math.floor(upper))
    else:
        lower, upper = float(lower), float(upper)
    if not lower < upper:
        raise InputError(f"Bandwidth search needs lower < upper, got [{lower}, {upper}]")

    f = _MemoObjective(objective, adaptive, label)
    f(lower)
    f(upper)

    a, b = float(lower), float(upper)
    c = b - GOLDEN_RATIO * (b - a)
    d = a + GOLDEN_RATIO * (b - a)
    for _ in range(max_iter):
        if adaptive:
            if b - a <= 3 or f.key(c) == f.key(d):
                break
        elif b - a <= tolerance * 0.5 * (abs(a) + abs(b)):
            break
        fc, fd = f(c), f(d)
        if math.isinf(fc) and math.isinf(fd):
            # both probes unusable; move toward the finite end of the range
            move_up = math.isfinite(f.cache[f.key(upper)])
        else:
            move_up = fc > fd
        if move_up:
            a, c = c, d
            d = a + GOLDEN_RATIO * (b - a)
        else:
            b, d = d, c
            c = b - GOLDEN_RATIO * (b - a)

    if adaptive:
        for candidate in range(int(math.floor(a)), int(math.ceil(b)) + 1):
            if lower <= candidate <= upper:
                f(candidate)

    bandwidth, score = f.best()
    if math.isinf(score):
        raise NoValidBandwidthError(
            f"{label} is infinite for every bandwidth evaluated in [{lower}, {upper}]"
        )

    multiple_minima = False
    if check_minima:
        for candidate in _minima_grid(lower, upper, adaptive):
            value = f(candidate)
            if value < score - 1e-12 * max(1.0, abs(score)):
                multiple_minima = True
        if multiple_minima:
            logger.warning(
                f"{label}: a coarse grid point beats the golden-section optimum {bandwidth}; "
                f"the objective may have multiple minima, inspect a bandwidth profile"
            )

    logger.info(f"Bandwidth search on {label}: optimum {bandwidth} (score {score:.6g})")
    return SearchResult(
        bandwidth=bandwidth,
        score=score,
        adaptive=adaptive,
        evaluations=dict(f.cache),
        multiple_minima=multiple_minima
    )


def grid_profile(
    objective: Objective,
    bandwidths: Sequence[Bandwidth],
    adaptive: bool,
    label: str = "objective",
    threads: int = 1
) -> BandwidthProfile:
    """Evaluate the objective at every bandwidth; infinite scores are kept"""
    if len(bandwidths) == 0:
        raise InputError("Bandwidth grid must not be empty")
    if adaptive:
        grid = sorted({int(round(b)) for b in bandwidths})
    else:
        grid = sorted({float(b) for b in bandwidths})
    metrics = get_metrics()

    def _evaluate(bandwidth: Bandwidth) -> float:
        score = float(objective(bandwidth))
        metrics.record_bandwidth_evaluation(label)
        return math.inf if math.isnan(score) else score

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(_evaluate, grid))
    else:
        scores = [_evaluate(b) for b in grid]

    return BandwidthProfile(
        bandwidths=np.asarray(grid, dtype=int if adaptive else float),
        scores=np.asarray(scores, dtype=float),
        label=label,
        adaptive=adaptive
    )


def default_bounds(dmat: np.ndarray, adaptive: bool, min_neighbours: int) -> Tuple[Bandwidth, Bandwidth]:
    """Search range: [min_neighbours, n] adaptive, or [max distance / 1000, max distance] fixed"""
    n = dmat.shape[0]
    if adaptive:
        lower = max(1, min(int(min_neighbours), n - 1))
        return lower, n
    max_dist = float(np.max(dmat))
    if not max_dist > 0.0:
        raise InputError("All points are coincident; a fixed bandwidth cannot be searched")
    return max_dist / 1000.0, max_dist
