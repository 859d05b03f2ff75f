"""
Data ingestion
CSV files with a header row, coordinate columns and numeric analysis columns;
categorical columns are kept as strings
"""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from shared.data.dataset import Dataset, create_dataset
from shared.utils.errors import InputError

logger = logging.getLogger(__name__)

BORDERLINE = "Borderline"
BORDERLINE_RANGE = (45.0, 55.0)


def _numeric_column(frame: pd.DataFrame, name: str) -> np.ndarray:
    raw = frame[name]
    numeric = pd.to_numeric(raw, errors="coerce")
    bad = numeric.isna() & raw.notna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise InputError(f"Non-numeric value {raw.iloc[row]!r} at row {row}, column '{name}'")
    values = numeric.to_numpy(dtype=float)
    missing = np.flatnonzero(~np.isfinite(values))
    if missing.size:
        raise InputError(f"Missing or non-finite value at row {int(missing[0])}, column '{name}'")
    return values


def load_csv(
    path: Union[str, Path],
    x_col: str = "X",
    y_col: str = "Y",
    variables: Optional[Sequence[str]] = None,
    label_cols: Sequence[str] = (),
    geodesic: bool = False
) -> Dataset:
    """
    Load a CSV file into a dataset, preserving row order

    Every column other than the coordinates and label columns is an analysis
    variable unless an explicit variable list is given.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Input file not found: {path}")
    label_cols = list(label_cols)
    try:
        frame = pd.read_csv(path, dtype={c: str for c in label_cols}, float_precision="round_trip")
    except pd.errors.EmptyDataError as e:
        raise InputError(f"Input file {path} is empty or has no header row") from e
    except pd.errors.ParserError as e:
        raise InputError(f"Cannot parse {path}: {e}") from e

    frame.columns = [str(c).strip() for c in frame.columns]
    if variables is None:
        variables = [c for c in frame.columns if c not in (x_col, y_col) and c not in label_cols]
    variables = list(variables)
    missing = [c for c in [x_col, y_col] + variables + label_cols if c not in frame.columns]
    if missing:
        raise InputError(f"Column(s) missing from {path.name}: {', '.join(missing)}")

    coords = np.column_stack([_numeric_column(frame, x_col), _numeric_column(frame, y_col)])
    values = (
        np.column_stack([_numeric_column(frame, v) for v in variables])
        if variables else np.empty((len(frame), 0))
    )
    labels = {}
    for column in label_cols:
        raw = frame[column]
        if raw.isna().any():
            row = int(np.flatnonzero(raw.isna().to_numpy())[0])
            raise InputError(f"Missing label at row {row}, column '{column}'")
        labels[column] = raw.astype(str).to_numpy()

    logger.info(f"Loaded {len(frame)} rows and {len(variables)} analysis variable(s) from {path}")
    return create_dataset(coords, values, variables, geodesic=geodesic, labels=labels)


def derive_election_classes(winner_share: Sequence[float], winners: Sequence[str]) -> np.ndarray:
    """Winner's label, or Borderline where the winning share lies in [45, 55]"""
    share = np.asarray(winner_share, dtype=float)
    winners = np.asarray(winners).astype(str)
    if share.shape != winners.shape:
        raise InputError(f"{share.size} shares but {winners.size} winner labels")
    bad = np.flatnonzero(~((share >= 0.0) & (share <= 100.0)))
    if bad.size:
        raise InputError(f"Winning share {share[bad[0]]} at row {int(bad[0])} is outside [0, 100]")
    low, high = BORDERLINE_RANGE
    borderline = (share >= low) & (share <= high)
    return np.where(borderline, BORDERLINE, winners).astype(str)
