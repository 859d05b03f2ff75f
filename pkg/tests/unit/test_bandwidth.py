"""
Unit tests for bandwidth search, profiles and model selectors
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from shared.bandwidth.search import BandwidthProfile, default_bounds, golden_section, grid_profile
from shared.bandwidth.selectors import bw_gwda, bw_gwpca, bw_gwr, cv_contributions, gwr_objective
from shared.regression.basic import gwr_basic, gwr_cv_contrib, gwr_cv_score
from shared.spatial.kernel import create_kernel, distance_matrix
from shared.stats.discriminant import GwdaSpec, gwda_cv_score
from shared.stats.pca import gwpca_cv_contrib, gwpca_cv_score
from shared.utils.errors import InputError, NoValidBandwidthError


class TestGoldenSection:
    """Test the generic minimiser"""

    def test_adaptive_quadratic(self):
        """Test an integer optimum is found exactly"""
        result = golden_section(lambda b: (b - 37) ** 2, 1, 100, adaptive=True)
        assert result.bandwidth == 37
        assert result.score == 0.0
        assert result.describe() == "bandwidth: 37 (adaptive)"

    def test_fixed_quadratic(self):
        """Test a continuous optimum is found within tolerance"""
        result = golden_section(lambda b: (b - 2.5) ** 2, 0.1, 10.0, adaptive=False)
        assert result.bandwidth == pytest.approx(2.5, abs=1e-3)
        assert not result.multiple_minima

    def test_infinite_region_avoided(self):
        """Test unusable small bandwidths steer the search upward"""
        result = golden_section(lambda b: math.inf if b < 20 else (b - 30) ** 2, 2, 100, adaptive=True)
        assert result.bandwidth == 30

    def test_ties_go_to_smaller_bandwidth(self):
        """Test a flat objective returns the lower bound"""
        result = golden_section(lambda b: 1.0, 5, 60, adaptive=True)
        assert result.bandwidth == 5

    def test_all_infinite(self):
        """Test an objective that is never finite raises"""
        with pytest.raises(NoValidBandwidthError):
            golden_section(lambda b: math.inf, 1, 50, adaptive=True)

    def test_nan_treated_as_infinite(self):
        """Test NaN scores are never selected"""
        result = golden_section(lambda b: math.nan if b > 40 else (b - 10) ** 2, 1, 50, adaptive=True)
        assert result.bandwidth == 10

    def test_empty_range(self):
        """Test lower >= upper is rejected"""
        with pytest.raises(InputError):
            golden_section(lambda b: b, 10, 10, adaptive=True)

    def test_multiple_minima_flagged(self):
        """Test a grid point beating the golden-section optimum is reported"""
        def objective(b):
            return -10.0 if 66 <= b <= 68 else (b - 20) ** 2 / 100.0 + 1.0

        result = golden_section(objective, 1, 100, adaptive=True)
        assert result.bandwidth == 20
        assert result.multiple_minima

    def test_history_sorted(self):
        """Test evaluated bandwidths are reported in order"""
        result = golden_section(lambda b: (b - 20) ** 2, 1, 64, adaptive=True)
        bandwidths = [b for b, _ in result.history()]
        assert bandwidths == sorted(bandwidths)
        assert (20, 0.0) in result.history()


class TestGridProfile:
    """Test bandwidth profiles"""

    def test_sorted_unique_grid(self):
        """Test the grid is sorted and de-duplicated"""
        profile = grid_profile(lambda b: (b - 30) ** 2, [50, 10, 30, 30.2, 20], adaptive=True)
        assert profile.bandwidths.tolist() == [10, 20, 30, 50]
        assert profile.argmin == 30
        assert profile.to_columns()['objective'].tolist() == [400.0, 100.0, 0.0, 400.0]

    def test_threaded_matches_serial(self):
        """Test threaded evaluation gives the same profile"""
        grid = np.linspace(0.5, 5.0, 10)
        serial = grid_profile(lambda b: math.sin(b), grid, adaptive=False)
        threaded = grid_profile(lambda b: math.sin(b), grid, adaptive=False, threads=4)
        assert np.array_equal(serial.scores, threaded.scores)

    def test_all_infinite_has_no_argmin(self):
        """Test an all-infinite profile has no optimum"""
        profile = BandwidthProfile(np.array([1.0, 2.0]), np.array([math.inf, math.inf]), "cv", False)
        assert profile.argmin is None

    def test_empty_grid(self):
        """Test an empty grid is rejected"""
        with pytest.raises(InputError):
            grid_profile(lambda b: b, [], adaptive=False)


class TestDefaultBounds:
    """Test default search ranges"""

    def test_adaptive(self):
        """Test [min neighbours, n] with the lower end capped at n - 1"""
        dmat = np.zeros((10, 10))
        assert default_bounds(dmat, True, 4) == (4, 10)
        assert default_bounds(dmat, True, 40) == (9, 10)

    def test_fixed(self):
        """Test [max distance / 1000, max distance]"""
        dmat = np.array([[0.0, 8.0], [8.0, 0.0]])
        assert default_bounds(dmat, False, 3) == (0.008, 8.0)

    def test_coincident_points(self):
        """Test a fixed search over coincident points is rejected"""
        with pytest.raises(InputError):
            default_bounds(np.zeros((3, 3)), False, 2)


class TestSelectors:
    """Test model bandwidth selectors"""

    def test_bw_gwr_aicc(self, regression_data, metric):
        """Test the selected score is the AICc of the fit at that bandwidth"""
        result = bw_gwr(regression_data, "y", ["x1", "x2"], "bisquare", True, metric)
        assert 8 <= result.bandwidth <= regression_data.n
        fit = gwr_basic(regression_data, "y", ["x1", "x2"],
                        create_kernel("bisquare", result.bandwidth, adaptive=True), metric)
        assert fit.aicc == pytest.approx(result.score)

    def test_bw_gwr_cv(self, regression_data, metric):
        """Test the CV optimum score is the CV score at that bandwidth"""
        result = bw_gwr(regression_data, "y", ["x1", "x2"], "gaussian", False, metric, objective="cv")
        kernel = create_kernel("gaussian", result.bandwidth)
        assert gwr_cv_score(regression_data, "y", ["x1", "x2"], kernel, metric) == pytest.approx(result.score)

    def test_unknown_objective(self, regression_data, metric):
        """Test objectives other than aicc and cv are rejected"""
        with pytest.raises(InputError):
            gwr_objective(regression_data, "y", ["x1"], "bisquare", True, metric, objective="bic")

    def test_bw_gwpca(self, random_data, metric):
        """Test the GW PCA optimum score is the CV score there"""
        result = bw_gwpca(random_data, 1, "bisquare", True, metric)
        kernel = create_kernel("bisquare", result.bandwidth, adaptive=True)
        assert gwpca_cv_score(random_data, kernel, metric, k=1) == pytest.approx(result.score)
        assert math.isfinite(result.score)

    def test_bw_gwda(self, class_data, metric):
        """Test the GW DA optimum is the lowest misclassification count evaluated"""
        spec = GwdaSpec("lda")
        result = bw_gwda(class_data, "class", ["f1", "f2"], spec, "bisquare", True, metric)
        assert result.score == min(result.evaluations.values())
        kernel = create_kernel("bisquare", result.bandwidth, adaptive=True)
        assert gwda_cv_score(class_data, "class", ["f1", "f2"], spec, kernel, metric) == result.score

    def test_cv_contributions_dispatch(self, regression_data, random_data, metric):
        """Test CV contributions dispatch to the model implementations"""
        kernel = create_kernel("bisquare", 20, adaptive=True)
        assert_allclose(
            cv_contributions("gwr", regression_data, kernel, metric, response="y", predictors=["x1", "x2"]),
            gwr_cv_contrib(regression_data, "y", ["x1", "x2"], kernel, metric)
        )
        dmat = distance_matrix(random_data.points, metric)
        assert_allclose(
            cv_contributions("gwpca", random_data, kernel, metric, dmat, k=2),
            gwpca_cv_contrib(random_data, kernel, metric, 2, dmat)
        )
        with pytest.raises(InputError):
            cv_contributions("gwda", random_data, kernel, metric)
