"""
Unit tests for CSV ingestion and result export
"""

import os

import numpy as np
import orjson
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from shared.data.dataset import create_dataset
from shared.data.export import write_results, write_table
from shared.data.loaders import BORDERLINE, derive_election_classes, load_csv
from shared.spatial.kernel import create_kernel, DistanceMetric
from shared.stats.summary import gwss
from shared.utils.errors import InputError


def _write(temp_dir, name, text):
    path = os.path.join(temp_dir, name)
    with open(path, "w") as f:
        f.write(text)
    return path


class TestLoadCsv:
    """Test CSV loading"""

    def test_loads_all_numeric_columns(self, regression_csv, regression_data):
        """Test every non-coordinate column becomes a variable in file order"""
        data = load_csv(regression_csv)
        assert data.names == ("y", "x1", "x2")
        assert data.n == regression_data.n
        assert np.array_equal(data.values, regression_data.values)
        assert np.array_equal(data.coords, regression_data.coords)

    def test_selected_variables_and_labels(self, class_csv):
        """Test an explicit variable list and a string label column"""
        data = load_csv(class_csv, variables=["f2"], label_cols=["class"])
        assert data.names == ("f2",)
        assert set(data.label("class")) == {"A", "B"}

    def test_custom_coordinate_columns(self, temp_dir):
        """Test coordinate column names are configurable"""
        path = _write(temp_dir, "lonlat.csv", "lon,lat,v\n-6.2,53.3,1\n-6.3,53.4,2\n")
        data = load_csv(path, x_col="lon", y_col="lat", geodesic=True)
        assert data.points.geodesic
        assert_allclose(data.column("v"), [1.0, 2.0])

    def test_missing_file(self, temp_dir):
        """Test a missing file is an input error"""
        with pytest.raises(InputError, match="not found"):
            load_csv(os.path.join(temp_dir, "absent.csv"))

    def test_missing_column(self, regression_csv):
        """Test requested columns must exist"""
        with pytest.raises(InputError, match="GenEl2004"):
            load_csv(regression_csv, variables=["GenEl2004"])

    def test_non_numeric_value(self, temp_dir):
        """Test non-numeric analysis values are reported with row and column"""
        path = _write(temp_dir, "bad.csv", "X,Y,v\n0,0,1\n1,1,abc\n")
        with pytest.raises(InputError, match="row 1, column 'v'"):
            load_csv(path)

    def test_missing_value(self, temp_dir):
        """Test empty cells are reported"""
        path = _write(temp_dir, "gap.csv", "X,Y,v\n0,0,1\n1,1,\n")
        with pytest.raises(InputError, match="row 1"):
            load_csv(path)

    def test_empty_file(self, temp_dir):
        """Test a file without a header is rejected"""
        with pytest.raises(InputError):
            load_csv(_write(temp_dir, "empty.csv", ""))


class TestElectionClasses:
    """Test Borderline class derivation"""

    def test_borderline_inclusive(self):
        """Test shares in [45, 55] become Borderline"""
        classes = derive_election_classes([44.9, 45.0, 50.0, 55.0, 55.1], ["D", "R", "D", "R", "D"])
        assert classes.tolist() == ["D", BORDERLINE, BORDERLINE, BORDERLINE, "D"]

    def test_share_out_of_range(self):
        """Test shares outside [0, 100] are rejected"""
        with pytest.raises(InputError):
            derive_election_classes([101.0], ["R"])


class TestExport:
    """Test CSV and GeoJSON output"""

    @pytest.fixture
    def result(self, random_data):
        return gwss(random_data, ["a", "b"], create_kernel("gaussian", 2.0), DistanceMetric())

    def test_csv_coordinates_first(self, temp_dir, random_data, result):
        """Test CSV output leads with coordinates and survives a round trip exactly"""
        path = write_results(result, os.path.join(temp_dir, "out.csv"), random_data.coords)
        frame = pd.read_csv(path, float_precision="round_trip")
        assert list(frame.columns) == ["X", "Y", "a_LM", "b_LM", "a_LSD", "b_LSD", "Cov_a.b", "Corr_a.b"]
        assert np.array_equal(frame["a_LM"].to_numpy(), result.means[:, 0])
        assert np.array_equal(frame["X"].to_numpy(), random_data.coords[:, 0])

    def test_geojson_features(self, temp_dir, random_data, result):
        """Test GeoJSON output is one point feature per location"""
        path = write_results(result, os.path.join(temp_dir, "out.geojson"), random_data.coords, fmt="geojson")
        with open(path, "rb") as f:
            collection = orjson.loads(f.read())
        assert collection["type"] == "FeatureCollection"
        assert len(collection["features"]) == random_data.n
        first = collection["features"][0]
        assert first["geometry"]["coordinates"] == [random_data.coords[0, 0], random_data.coords[0, 1]]
        assert first["properties"]["Corr_a.b"] == result.correlations[0, 0]

    def test_csv_rewrite_is_byte_identical(self, temp_dir, regression_csv):
        """Test loading a written file and writing it again reproduces the same bytes"""
        def rewrite(source, name):
            data = load_csv(source)
            columns = {v: data.column(v) for v in data.names}
            return write_results(columns, os.path.join(temp_dir, name), data.coords)

        first = rewrite(regression_csv, "first.csv")
        second = rewrite(first, "second.csv")
        with open(first, "rb") as a, open(second, "rb") as b:
            assert a.read() == b.read()
        assert np.array_equal(load_csv(second).values, load_csv(regression_csv).values)

    def test_csv_and_geojson_agree(self, temp_dir, random_data, result):
        """Test both formats carry identical numbers for every column"""
        csv_path = write_results(result, os.path.join(temp_dir, "same.csv"), random_data.coords)
        json_path = write_results(result, os.path.join(temp_dir, "same.geojson"), random_data.coords, fmt="geojson")
        frame = pd.read_csv(csv_path, float_precision="round_trip")
        with open(json_path, "rb") as f:
            features = orjson.loads(f.read())["features"]
        geometry = np.array([feature["geometry"]["coordinates"] for feature in features])
        assert np.array_equal(frame[["X", "Y"]].to_numpy(), geometry)
        for name in result.to_columns():
            from_json = np.array([feature["properties"][name] for feature in features], dtype=float)
            assert np.array_equal(frame[name].to_numpy(), from_json), name

    def test_geojson_nan_is_null(self, temp_dir):
        """Test undefined values are written as null"""
        coords = np.array([[0.0, 0.0], [1.0, 1.0]])
        path = write_results({'v': np.array([np.nan, 1.5]), 'label': np.array(["x", "y"])},
                             os.path.join(temp_dir, "nan.geojson"), coords, fmt="geojson")
        with open(path, "rb") as f:
            features = orjson.loads(f.read())["features"]
        assert features[0]["properties"] == {'v': None, 'label': 'x'}

    def test_row_count_mismatch(self, temp_dir):
        """Test columns must have one value per location"""
        with pytest.raises(InputError):
            write_results({'v': np.ones(3)}, os.path.join(temp_dir, "x.csv"), np.zeros((2, 2)))

    def test_unknown_format(self, temp_dir):
        """Test only csv and geojson are supported"""
        with pytest.raises(InputError):
            write_results({'v': np.ones(2)}, os.path.join(temp_dir, "x.shp"), np.zeros((2, 2)), fmt="shapefile")

    def test_write_table_creates_directories(self, temp_dir):
        """Test tables are written under missing parent directories"""
        path = write_table({'bandwidth': [10, 20], 'cv': [1.5, 0.5]}, os.path.join(temp_dir, "deep", "p.csv"))
        assert pd.read_csv(path)["cv"].tolist() == [1.5, 0.5]

    def test_dataset_rejects_duplicate_names(self):
        """Test variable names must be unique"""
        with pytest.raises(InputError):
            create_dataset(np.zeros((2, 2)), np.ones((2, 2)), ["v", "v"])

    def test_with_label_leaves_original(self, class_data):
        """Test adding a label column returns a new dataset"""
        tagged = class_data.with_label("zone", ["n"] * class_data.n)
        assert set(tagged.label("zone")) == {"n"}
        assert np.array_equal(tagged.label("class"), class_data.label("class"))
        assert "zone" not in class_data.labels
