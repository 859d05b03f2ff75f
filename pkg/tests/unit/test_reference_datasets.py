"""
Published results on the Dublin voter turnout and US county election data

Skipped unless GW_DUBLIN_CSV or GW_USELECT_CSV points at the data file. The
election file has X/Y county centroids, a three-class winner column
(Borderline, Bush, Kerry) and the five census predictors below.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from shared.bandwidth.selectors import bw_gwda, bw_gwpca, bw_gwr
from shared.data.loaders import load_csv
from shared.regression.basic import five_number_summary, gwr_basic
from shared.regression.extensions import gwr_mixed
from shared.spatial.kernel import DistanceMetric, create_kernel, distance_matrix
from shared.stats.discriminant import (
    GwdaSpec, classification_rate, confusion_matrix, global_fit_predict, gwda_fit_predict
)
from shared.stats.pca import gwpca, gwpca_cv_contrib, standardize_global
from shared.stats.summary import global_statistics
from tests.conftest import DUBLIN_VARIABLES

RESPONSE = "GenEl2004"
ELECTION_VARIABLES = ["unemploy", "pctcoled", "PEROVER65", "pcturban", "WHITE"]
ELECTION_CLASSES = ["Borderline", "Bush", "Kerry"]


@pytest.fixture
def dublin(dublin_csv):
    return load_csv(dublin_csv, variables=[RESPONSE] + DUBLIN_VARIABLES)


@pytest.fixture
def dublin_dmat(dublin):
    return distance_matrix(dublin.points, DistanceMetric())


class TestDublinSummary:
    """Test global correlations behind the local correlation maps"""

    def test_global_correlations(self, dublin):
        """Test turnout vs rent and rent vs unemployment"""
        stats = global_statistics(dublin, [RESPONSE, "LARent", "Unempl"])
        assert stats["Corr_GenEl2004.LARent"] == pytest.approx(-0.68, abs=0.01)
        assert stats["Corr_LARent.Unempl"] == pytest.approx(0.67, abs=0.01)


class TestDublinPca:
    """Test global and local PCA of the standardised census variables"""

    def test_global_ptv(self, dublin):
        """Test the global proportion of variance row"""
        data = standardize_global(dublin.select(DUBLIN_VARIABLES))
        result = gwpca(data, create_kernel("boxcar", 1e9), DistanceMetric(), k=3)
        assert_allclose(result.ptv[0], [36.084, 25.586, 11.919, 10.530, 6.890, 3.679, 3.111, 2.196], atol=0.01)

    def test_cv_bandwidth_and_contributions(self, dublin, dublin_dmat):
        """Test the CV bandwidth for three components and the largest CV contribution"""
        data = standardize_global(dublin.select(DUBLIN_VARIABLES))
        result = bw_gwpca(data, 3, "bisquare", True, DistanceMetric(), dmat=dublin_dmat)
        assert result.bandwidth == 131
        contributions = gwpca_cv_contrib(data, create_kernel("bisquare", 131, adaptive=True),
                                         DistanceMetric(), 3, dublin_dmat)
        assert float(np.max(contributions)) == pytest.approx(98.4, abs=0.5)


class TestDublinRegression:
    """Test the basic and mixed turnout models"""

    def test_aicc_bandwidth(self, dublin, dublin_dmat):
        """Test the AICc-optimal adaptive bisquare bandwidth"""
        result = bw_gwr(dublin, RESPONSE, DUBLIN_VARIABLES, "bisquare", True, DistanceMetric(), dmat=dublin_dmat)
        assert result.bandwidth == 109

    def test_unemployment_surface(self, dublin, dublin_dmat):
        """Test the five-number summary of the unemployment coefficient"""
        fit = gwr_basic(dublin, RESPONSE, DUBLIN_VARIABLES, create_kernel("bisquare", 109, adaptive=True),
                        DistanceMetric(), dublin_dmat)
        summary = five_number_summary(fit.names, fit.coefficients)
        row = summary.row("Unempl")
        assert row[0] == pytest.approx(-2.318, abs=0.01)
        assert row[2] == pytest.approx(-0.7649, abs=0.01)
        assert row[4] == pytest.approx(-0.0925, abs=0.01)

    def test_mixed_global_coefficients(self, dublin, dublin_dmat):
        """Test the global terms of the mixed model"""
        global_vars = ["DiffAdd", "LARent", "LowEduc", "Age25_44", "Age45_64"]
        local_vars = [v for v in DUBLIN_VARIABLES if v not in global_vars]
        mixed = gwr_mixed(dublin, RESPONSE, local_vars, global_vars, create_kernel("bisquare", 109, adaptive=True),
                          DistanceMetric(), intercept_fixed=True, dmat=dublin_dmat)
        estimates = dict(zip(mixed.global_names, mixed.global_coefficients))
        expected = {'Intercept': 86.314, 'DiffAdd': -0.153, 'LARent': -0.115, 'LowEduc': 0.129,
                    'Age25_44': -0.532, 'Age45_64': -0.258}
        for name, value in expected.items():
            assert estimates[name] == pytest.approx(value, abs=0.01)


@pytest.fixture
def uselect(uselect_csv):
    return load_csv(uselect_csv, variables=ELECTION_VARIABLES, label_cols=["winner"])


@pytest.mark.slow
class TestUSElection:
    """Test global and GW linear discriminant analysis of the county winners"""

    def test_actual_class_totals(self, uselect):
        """Test the actual Borderline, Bush and Kerry county counts"""
        matrix = confusion_matrix(uselect.label("winner"), uselect.label("winner"), ELECTION_CLASSES)
        assert matrix.column_totals.tolist() == [636, 2149, 326]
        assert matrix.total == 3111

    def test_global_rate(self, uselect):
        """Test the global rule classifies about 72.5% of counties and rarely predicts Borderline"""
        result = global_fit_predict(uselect, "winner", ELECTION_VARIABLES, GwdaSpec("lda"))
        matrix = confusion_matrix(uselect.label("winner"), result.predicted, ELECTION_CLASSES)
        assert classification_rate(matrix) == pytest.approx(0.725, abs=0.01)
        assert matrix.row_totals[0] < 20

    def test_gw_rate(self, uselect):
        """Test the GW rule at the CV-optimal bandwidth classifies about 74.0% of counties"""
        metric = DistanceMetric()
        dmat = distance_matrix(uselect.points, metric)
        spec = GwdaSpec("lda")
        bandwidth = bw_gwda(uselect, "winner", ELECTION_VARIABLES, spec, "bisquare", True, metric,
                            dmat=dmat).bandwidth
        result = gwda_fit_predict(uselect, "winner", ELECTION_VARIABLES, spec,
                                  create_kernel("bisquare", bandwidth, adaptive=True), metric, dmat)
        matrix = confusion_matrix(uselect.label("winner"), result.predicted, ELECTION_CLASSES)
        assert matrix.column_totals.tolist() == [636, 2149, 326]
        assert classification_rate(matrix) == pytest.approx(0.740, abs=0.01)
