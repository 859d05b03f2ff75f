"""
Result persistence
Per-location tables as CSV or GeoJSON point features, and plain tables
(profiles, simulated distributions) as CSV
"""

import math
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np
import orjson
import pandas as pd

from shared.utils.errors import InputError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
FORMATS = ("csv", "geojson")


def _frame(columns: Mapping[str, Any]) -> pd.DataFrame:
    lengths = {name: len(values) for name, values in columns.items()}
    if len(set(lengths.values())) > 1:
        raise InputError(f"Result columns have unequal lengths: {lengths}")
    return pd.DataFrame({name: np.asarray(values) for name, values in columns.items()})


def write_table(columns: Mapping[str, Any], path: Union[str, Path]) -> Path:
    """Write a table as CSV with 17 significant digits"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        _frame(columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise InputError(f"Cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")
    return path


def _json_value(value: Any) -> Any:
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    return str(value)


def _feature_collection(coords: np.ndarray, columns: Mapping[str, Any]) -> Dict[str, Any]:
    arrays = {name: np.asarray(values) for name, values in columns.items()}
    features = []
    for i in range(coords.shape[0]):
        features.append({
            'type': 'Feature',
            'geometry': {'type': 'Point', 'coordinates': [float(coords[i, 0]), float(coords[i, 1])]},
            'properties': {name: _json_value(values[i]) for name, values in arrays.items()}
        })
    return {'type': 'FeatureCollection', 'features': features}


def write_results(
    result: Any,
    path: Union[str, Path],
    coords: np.ndarray,
    fmt: str = "csv",
    coord_names: Tuple[str, str] = ("X", "Y")
) -> Path:
    """
    Write a per-location result: anything with to_columns(), or a column mapping

    Rows follow the input row order; CSV leads with the coordinate columns.
    """
    if fmt not in FORMATS:
        raise InputError(f"Unknown output format '{fmt}'; expected one of {', '.join(FORMATS)}")
    columns = result.to_columns() if hasattr(result, "to_columns") else dict(result)
    coords = np.asarray(coords, dtype=float)
    for name, values in columns.items():
        if len(values) != coords.shape[0]:
            raise InputError(f"Column '{name}' has {len(values)} rows for {coords.shape[0]} locations")

    if fmt == "csv":
        table = {coord_names[0]: coords[:, 0], coord_names[1]: coords[:, 1]}
        table.update(columns)
        return write_table(table, path)

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(orjson.dumps(_feature_collection(coords, columns)))
    except OSError as e:
        raise InputError(f"Cannot write {path}: {e}") from e
    logger.info(f"Wrote {len(columns)} properties for {coords.shape[0]} features to {path}")
    return path
