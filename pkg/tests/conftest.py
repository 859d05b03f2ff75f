"""
Pytest configuration and shared fixtures for GeoWeight tests
"""

import pytest
import tempfile
import os
import shutil
import sys

import numpy as np
import pandas as pd

# Add project root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared.data.dataset import create_dataset
from shared.spatial.kernel import DistanceMetric, create_kernel

DUBLIN_VARIABLES = ["DiffAdd", "LARent", "SC1", "Unempl", "LowEduc", "Age18_24", "Age25_44", "Age45_64"]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: many-run Monte Carlo calibration checks")


@pytest.fixture
def temp_dir():
    """Create temporary directory for tests"""
    temp_dir = tempfile.mkdtemp()
    yield temp_dir
    shutil.rmtree(temp_dir)


@pytest.fixture
def metric():
    """Euclidean distance"""
    return DistanceMetric()


@pytest.fixture
def global_kernel():
    """Boxcar wide enough that every window is the whole study area"""
    return create_kernel("boxcar", 1e6, adaptive=False)


@pytest.fixture
def random_data():
    """40 points with three correlated variables"""
    rng = np.random.default_rng(11)
    coords = rng.uniform(0.0, 10.0, size=(40, 2))
    base = rng.normal(size=40)
    values = np.column_stack([
        base + 0.3 * rng.normal(size=40),
        -base + 0.8 * rng.normal(size=40),
        coords[:, 0] * 0.2 + rng.normal(size=40)
    ])
    return create_dataset(coords, values, ["a", "b", "c"])


@pytest.fixture
def regression_data():
    """50 points where the x1 coefficient grows from west to east"""
    rng = np.random.default_rng(7)
    coords = rng.uniform(0.0, 10.0, size=(50, 2))
    x1 = rng.normal(size=50)
    x2 = rng.normal(size=50)
    y = 1.0 + (1.0 + 0.2 * coords[:, 0]) * x1 - 0.5 * x2 + 0.1 * rng.normal(size=50)
    return create_dataset(coords, np.column_stack([y, x1, x2]), ["y", "x1", "x2"])


@pytest.fixture
def linear_data():
    """Noiseless y = 3 + 2 x1 on 30 points"""
    rng = np.random.default_rng(3)
    coords = rng.uniform(0.0, 10.0, size=(30, 2))
    x1 = rng.normal(size=30)
    return create_dataset(coords, np.column_stack([3.0 + 2.0 * x1, x1]), ["y", "x1"])


@pytest.fixture
def class_data():
    """60 points with two interleaved classes separated in feature space"""
    rng = np.random.default_rng(5)
    coords = rng.uniform(0.0, 10.0, size=(60, 2))
    labels = np.where(np.arange(60) % 2 == 0, "A", "B")
    centres = np.where((labels == "A")[:, np.newaxis], [0.0, 0.0], [2.5, 2.5])
    features = centres + rng.normal(size=(60, 2))
    return create_dataset(coords, features, ["f1", "f2"], labels={'class': labels})


@pytest.fixture
def regression_csv(temp_dir, regression_data):
    """Regression data written as a CSV file with X/Y coordinates"""
    path = os.path.join(temp_dir, "regression.csv")
    frame = pd.DataFrame({'X': regression_data.coords[:, 0], 'Y': regression_data.coords[:, 1]})
    for name in regression_data.names:
        frame[name] = regression_data.column(name)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


@pytest.fixture
def class_csv(temp_dir, class_data):
    """Class data written as a CSV file with a label column"""
    path = os.path.join(temp_dir, "classes.csv")
    frame = pd.DataFrame({'X': class_data.coords[:, 0], 'Y': class_data.coords[:, 1]})
    for name in class_data.names:
        frame[name] = class_data.column(name)
    frame['class'] = class_data.label('class')
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def _dataset_file(variable: str) -> str:
    path = os.getenv(variable)
    if not path or not os.path.isfile(path):
        pytest.skip(f"{variable} not set to a data file")
    return path


@pytest.fixture
def dublin_csv():
    """Dublin voter turnout file (322 rows); skipped unless GW_DUBLIN_CSV is set"""
    return _dataset_file("GW_DUBLIN_CSV")


@pytest.fixture
def uselect_csv():
    """US election file (3111 rows); skipped unless GW_USELECT_CSV is set"""
    return _dataset_file("GW_USELECT_CSV")
