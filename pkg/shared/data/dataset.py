"""
Dataset model: n observations of m named numeric variables bound to point locations,
plus optional categorical columns (class labels)
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from shared.spatial.kernel import PointSet
from shared.utils.errors import InputError


@dataclass(frozen=True)
class Dataset:
    """Numeric variables and categorical columns at point locations"""
    points: PointSet
    values: np.ndarray
    names: Tuple[str, ...]
    labels: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        names = tuple(str(n) for n in self.names)
        if values.ndim != 2:
            raise InputError(f"Values must be an n x m matrix, got shape {values.shape}")
        if values.shape[0] != self.points.n:
            raise InputError(
                f"Row count mismatch: {values.shape[0]} value rows for {self.points.n} points"
            )
        if values.shape[1] != len(names):
            raise InputError(f"{values.shape[1]} value columns but {len(names)} names")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise InputError(f"Duplicate variable names: {', '.join(dupes)}")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            row, col = (int(v) for v in bad[0])
            raise InputError(f"Non-finite value at row {row}, column '{names[col]}'")
        labels = {}
        for key, column in self.labels.items():
            column = np.asarray(column).astype(str)
            if column.shape != (self.points.n,):
                raise InputError(f"Label column '{key}' must have {self.points.n} entries")
            labels[str(key)] = column
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def m(self) -> int:
        return int(self.values.shape[1])

    @property
    def coords(self) -> np.ndarray:
        return self.points.coords

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"Unknown variable '{name}'; available: {', '.join(self.names)}")

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def columns(self, names: Sequence[str]) -> np.ndarray:
        return self.values[:, [self.index(n) for n in names]]

    def label(self, name: str) -> np.ndarray:
        if name not in self.labels:
            available = ", ".join(self.labels) or "none"
            raise InputError(f"Unknown label column '{name}'; available: {available}")
        return self.labels[name]

    def select(self, names: Sequence[str]) -> "Dataset":
        """Dataset restricted to the given numeric variables"""
        names = list(names)
        if not names:
            raise InputError("At least one variable must be selected")
        return Dataset(self.points, self.columns(names), tuple(names), dict(self.labels))

    def with_values(self, values: np.ndarray, names: Optional[Sequence[str]] = None) -> "Dataset":
        return Dataset(self.points, values, tuple(names) if names is not None else self.names, dict(self.labels))

    def with_label(self, name: str, column: Sequence[str]) -> "Dataset":
        """Dataset with one categorical column added or replaced"""
        labels = dict(self.labels)
        labels[name] = np.asarray(column)
        return Dataset(self.points, self.values, self.names, labels)


def create_dataset(
    coords: np.ndarray,
    values: np.ndarray,
    names: Sequence[str],
    geodesic: bool = False,
    labels: Optional[Dict[str, Sequence[str]]] = None
) -> Dataset:
    """Factory function to build a dataset from plain arrays"""
    points = PointSet(np.asarray(coords, dtype=float), geodesic=geodesic)
    return Dataset(points, np.asarray(values, dtype=float), tuple(names),
                   {k: np.asarray(v) for k, v in (labels or {}).items()})
