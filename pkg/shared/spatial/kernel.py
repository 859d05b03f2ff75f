"""
Distances and geographic weights
Builds distance matrices and per-calibration-point weight vectors from a kernel specification
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Any, Union

import numpy as np
from scipy.spatial.distance import cdist

from shared.utils.errors import DegenerateBandwidthError, InputError

logger = logging.getLogger(__name__)

# mean Earth radius in metres
EARTH_RADIUS_M = 6371009.0


class KernelFunction(Enum):
    """Kernel weighting functions"""
    BOXCAR = "boxcar"
    BISQUARE = "bisquare"
    TRICUBE = "tricube"
    GAUSSIAN = "gaussian"
    EXPONENTIAL = "exponential"

    @property
    def is_compact(self) -> bool:
        """Compact kernels give zero weight beyond the radius"""
        return self in (KernelFunction.BOXCAR, KernelFunction.BISQUARE, KernelFunction.TRICUBE)


@dataclass(frozen=True)
class PointSet:
    """Calibration geometry: n points in projected units or lon/lat degrees"""
    coords: np.ndarray
    geodesic: bool = False

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise InputError(f"Coordinates must be an n x 2 matrix, got shape {coords.shape}")
        if coords.shape[0] < 1:
            raise InputError("At least one point is required")
        bad = np.flatnonzero(~np.all(np.isfinite(coords), axis=1))
        if bad.size:
            raise InputError(f"Non-finite coordinate at row {int(bad[0])}")
        if self.geodesic:
            lon, lat = coords[:, 0], coords[:, 1]
            bad = np.flatnonzero((np.abs(lon) > 180.0) | (np.abs(lat) > 90.0))
            if bad.size:
                raise InputError(
                    f"Row {int(bad[0])} is outside lon [-180, 180] / lat [-90, 90] "
                    f"required for geodesic distances"
                )
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])


@dataclass(frozen=True)
class DistanceMetric:
    """Minkowski distance of power p on axes rotated by theta, or great-circle distance"""
    p: float = 2.0
    theta: float = 0.0
    geodesic: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 1.0):
            raise InputError(f"Minkowski power must be >= 1, got {self.p}")
        if not (0.0 <= self.theta < 2.0 * math.pi):
            raise InputError(f"Rotation angle must lie in [0, 2*pi), got {self.theta}")

    def to_dict(self) -> Dict[str, Any]:
        if self.geodesic:
            return {'kind': 'geodesic'}
        return {'kind': 'minkowski', 'p': self.p, 'theta': self.theta}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel function with a fixed distance or adaptive neighbour-count bandwidth"""
    function: KernelFunction
    bandwidth: Union[float, int]
    adaptive: bool = False

    def __post_init__(self):
        if isinstance(self.function, str):
            object.__setattr__(self, "function", KernelFunction(self.function))
        if self.adaptive:
            n_neighbours = int(round(float(self.bandwidth)))
            if n_neighbours < 1 or abs(float(self.bandwidth) - n_neighbours) > 1e-9:
                raise InputError(f"Adaptive bandwidth must be a positive integer, got {self.bandwidth}")
            object.__setattr__(self, "bandwidth", n_neighbours)
        else:
            bw = float(self.bandwidth)
            if not (bw > 0.0) or math.isnan(bw):
                raise InputError(f"Fixed bandwidth must be positive, got {self.bandwidth}")
            object.__setattr__(self, "bandwidth", bw)

    def with_bandwidth(self, bandwidth: Union[float, int]) -> "KernelSpec":
        return KernelSpec(self.function, bandwidth, self.adaptive)

    def describe(self) -> str:
        mode = "adaptive" if self.adaptive else "fixed"
        return f"{self.function.value} {mode} bandwidth {self.bandwidth}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            'function': self.function.value,
            'bandwidth': self.bandwidth,
            'adaptive': self.adaptive
        }


def _great_circle(lonlat_a: np.ndarray, lonlat_b: np.ndarray) -> np.ndarray:
    """Haversine distances in metres between two sets of lon/lat points"""
    a = np.radians(lonlat_a)
    b = np.radians(lonlat_b)
    lat_a = a[:, [1]]
    lat_b = b[:, [1]]
    d_lat = lat_b.T - lat_a
    d_lon = b[:, 0][np.newaxis, :] - a[:, [0]]
    h = np.sin(d_lat / 2) ** 2 + np.cos(lat_a) * np.cos(lat_b.T) * np.sin(d_lon / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _rotate(coords: np.ndarray, theta: float) -> np.ndarray:
    if theta == 0.0:
        return coords
    c, s = math.cos(theta), math.sin(theta)
    rotation = np.array([[c, -s], [s, c]])
    return coords @ rotation


def cross_distances(targets: PointSet, points: PointSet, metric: DistanceMetric) -> np.ndarray:
    """Distances from each target (rows) to each point (columns)"""
    if metric.geodesic:
        if not (targets.geodesic and points.geodesic):
            raise InputError("Geodesic distances need points flagged as lon/lat")
        return _great_circle(targets.coords, points.coords)
    a = _rotate(targets.coords, metric.theta)
    b = _rotate(points.coords, metric.theta)
    return cdist(a, b, metric="minkowski", p=metric.p)


def distance_matrix(points: PointSet, metric: DistanceMetric) -> np.ndarray:
    """Symmetric n x n distance matrix with a zero diagonal"""
    dmat = cross_distances(points, points, metric)
    dmat = 0.5 * (dmat + dmat.T)
    np.fill_diagonal(dmat, 0.0)
    return dmat


def effective_radius(d_i: np.ndarray, spec: KernelSpec) -> float:
    """Fixed radius, or distance to the Nth nearest neighbour (self included)"""
    if not spec.adaptive:
        return float(spec.bandwidth)
    d_i = np.asarray(d_i, dtype=float)
    n_neighbours = int(spec.bandwidth)
    if n_neighbours > d_i.size:
        raise InputError(f"Adaptive bandwidth N={n_neighbours} exceeds the number of observations {d_i.size}")
    return float(np.partition(d_i, n_neighbours - 1)[n_neighbours - 1])


def _kernel_weights(d: np.ndarray, radius: float, function: KernelFunction) -> np.ndarray:
    if function is KernelFunction.BOXCAR:
        return (d <= radius).astype(float)
    if radius <= 0.0:
        raise DegenerateBandwidthError(None, f"Degenerate bandwidth: {function.value} kernel needs a positive radius")
    z = d / radius
    if not function.is_compact:
        return np.exp(-0.5 * z ** 2) if function is KernelFunction.GAUSSIAN else np.exp(-z)
    power = 2 if function is KernelFunction.BISQUARE else 3
    return np.where(d <= radius, (1.0 - z ** power) ** power, 0.0)


def weight_vector(d_i: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Geographic weights of all observations for one calibration point"""
    d_i = np.asarray(d_i, dtype=float)
    radius = effective_radius(d_i, spec)
    return _kernel_weights(d_i, radius, spec.function)


def weight_matrix(dmat: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Row i holds the weight vector of calibration point i"""
    dmat = np.asarray(dmat, dtype=float)
    if not spec.adaptive:
        return _kernel_weights(dmat, float(spec.bandwidth), spec.function)
    n_neighbours = int(spec.bandwidth)
    if n_neighbours > dmat.shape[1]:
        raise InputError(f"Adaptive bandwidth N={n_neighbours} exceeds the number of observations {dmat.shape[1]}")
    radii = np.partition(dmat, n_neighbours - 1, axis=1)[:, n_neighbours - 1]
    if spec.function is KernelFunction.BOXCAR:
        return (dmat <= radii[:, np.newaxis]).astype(float)
    if np.any(radii <= 0.0):
        row = int(np.flatnonzero(radii <= 0.0)[0])
        raise DegenerateBandwidthError(
            row,
            f"Degenerate bandwidth at calibration point {row}: its N={n_neighbours} "
            f"nearest neighbours are all coincident"
        )
    weights = np.empty_like(dmat)
    for i, radius in enumerate(radii):
        weights[i] = _kernel_weights(dmat[i], float(radius), spec.function)
    return weights


def create_kernel(function: str, bandwidth: Union[float, int], adaptive: bool = False) -> KernelSpec:
    """Factory for kernel specifications from plain values"""
    try:
        kernel_function = KernelFunction(function.lower())
    except ValueError:
        choices = ", ".join(k.value for k in KernelFunction)
        raise InputError(f"Unknown kernel '{function}'; expected one of {choices}")
    return KernelSpec(kernel_function, bandwidth, adaptive)
