"""
Unit tests for the GeoWeight command line
"""

import os
from unittest.mock import patch

import numpy as np
import orjson
import pandas as pd
import pytest
from click.testing import CliRunner

from cli.apps.gw_cli.main import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, cli
from shared.stats.summary import montecarlo_gwss
from shared.utils.errors import NoValidBandwidthError


@pytest.fixture
def runner(monkeypatch):
    monkeypatch.setenv("GW_LOG_FORMAT", "console")
    monkeypatch.setenv("GW_THREADS", "1")
    return CliRunner()


@pytest.fixture
def singular_csv(temp_dir):
    """A response with two exactly collinear predictors"""
    rng = np.random.default_rng(0)
    x = rng.normal(size=20)
    frame = pd.DataFrame({
        'X': rng.uniform(size=20), 'Y': rng.uniform(size=20), 'y': x + rng.normal(size=20), 'a': x, 'b': 2 * x
    })
    path = os.path.join(temp_dir, "singular.csv")
    frame.to_csv(path, index=False)
    return path


class TestCommandLine:
    """Test subcommands, outputs and exit codes"""

    def test_unknown_subcommand(self, runner):
        """Test an unknown subcommand is a usage error"""
        result = runner.invoke(cli, ["krige"])
        assert result.exit_code == EXIT_INPUT

    def test_dist(self, runner, regression_csv, temp_dir):
        """Test the distance matrix is written as an n x n table"""
        out = os.path.join(temp_dir, "dist.csv")
        result = runner.invoke(cli, ["dist", "--input", regression_csv, "--output", out])
        assert result.exit_code == EXIT_OK, result.output
        assert pd.read_csv(out).shape == (50, 50)

    def test_gwss_schema(self, runner, regression_csv, temp_dir):
        """Test GW summary statistics for two variables"""
        out = os.path.join(temp_dir, "gwss.csv")
        result = runner.invoke(cli, ["gwss", "--input", regression_csv, "--var", "x1,x2", "--bw", "20",
                                     "--output", out])
        assert result.exit_code == EXIT_OK, result.output
        columns = list(pd.read_csv(out).columns)
        assert columns == ["X", "Y", "x1_LM", "x2_LM", "x1_LSD", "x2_LSD", "Cov_x1.x2", "Corr_x1.x2"]

    def test_gwss_auto_bandwidth_rejected(self, runner, regression_csv):
        """Test summary statistics need an explicit bandwidth"""
        result = runner.invoke(cli, ["gwss", "--input", regression_csv, "--var", "x1"])
        assert result.exit_code == EXIT_INPUT

    def test_gwr_with_adjusted_p_values(self, runner, regression_csv, temp_dir):
        """Test a GW regression run writes coefficients and adjusted p-values"""
        out = os.path.join(temp_dir, "gwr.csv")
        result = runner.invoke(cli, ["gwr", "--input", regression_csv, "--response", "y", "--var", "x1",
                                     "--var", "x2", "--bw", "25", "--output", out])
        assert result.exit_code == EXIT_OK, result.output
        frame = pd.read_csv(out)
        for name in ("Intercept", "x1", "x1_SE", "x1_t", "x1_p_bh", "x2_p_fb", "Local_R2"):
            assert name in frame.columns
        assert "AICc" in result.output

    def test_gwr_auto_bandwidth(self, runner, regression_csv):
        """Test the selected bandwidth is printed"""
        result = runner.invoke(cli, ["gwr", "--input", regression_csv, "--response", "y"])
        assert result.exit_code == EXIT_OK, result.output
        assert "bandwidth: " in result.output
        assert "(adaptive)" in result.output

    def test_gwr_geojson(self, runner, regression_csv, temp_dir):
        """Test GeoJSON output"""
        out = os.path.join(temp_dir, "gwr.geojson")
        result = runner.invoke(cli, ["gwr", "--input", regression_csv, "--response", "y", "--bw", "25",
                                     "--format", "geojson", "--output", out])
        assert result.exit_code == EXIT_OK, result.output
        with open(out, "rb") as f:
            assert len(orjson.loads(f.read())["features"]) == 50

    def test_missing_column(self, runner, regression_csv):
        """Test a missing column exits with the input error code"""
        result = runner.invoke(cli, ["gwr", "--input", regression_csv, "--response", "turnout", "--bw", "20"])
        assert result.exit_code == EXIT_INPUT

    def test_missing_response(self, runner, regression_csv):
        """Test regression without a response is an input error"""
        result = runner.invoke(cli, ["gwr", "--input", regression_csv, "--bw", "20"])
        assert result.exit_code == EXIT_INPUT

    def test_singular_design(self, runner, singular_csv):
        """Test a singular local design exits with the numerical failure code"""
        result = runner.invoke(cli, ["gwr", "--input", singular_csv, "--response", "y", "--bw", "10"])
        assert result.exit_code == EXIT_NUMERICAL

    def test_simulations_need_seed(self, runner, regression_csv):
        """Test nsim without a seed is rejected before any work"""
        result = runner.invoke(cli, ["mc", "--input", regression_csv, "--model", "gwr", "--response", "y",
                                     "--bw", "20", "--nsim", "9"])
        assert result.exit_code == EXIT_INPUT

    def test_mc_gwr_reproducible(self, runner, regression_csv, temp_dir):
        """Test the coefficient test writes identical files for one seed"""
        outputs = []
        for name in ("mc1.csv", "mc2.csv"):
            out = os.path.join(temp_dir, name)
            result = runner.invoke(cli, ["mc", "--input", regression_csv, "--model", "gwr", "--response", "y",
                                         "--bw", "25", "--nsim", "9", "--seed", "11", "--output", out])
            assert result.exit_code == EXIT_OK, result.output
            with open(out, "rb") as f:
                outputs.append(f.read())
        assert outputs[0] == outputs[1]

    def test_mc_gwss(self, runner, regression_csv, temp_dir):
        """Test the summary statistics test writes pseudo p-values and flags"""
        out = os.path.join(temp_dir, "mc_gwss.csv")
        result = runner.invoke(cli, ["mc", "--input", regression_csv, "--model", "gwss", "--var", "x1",
                                     "--bw", "20", "--nsim", "19", "--seed", "2", "--output", out])
        assert result.exit_code == EXIT_OK, result.output
        assert {"x1_LM", "x1_LM_sig"} <= set(pd.read_csv(out).columns)

    def test_bw_profile(self, runner, regression_csv, temp_dir):
        """Test bandwidth selection with a profile on a given grid"""
        profile = os.path.join(temp_dir, "profile.csv")
        result = runner.invoke(cli, ["bw", "--input", regression_csv, "--model", "gwr", "--response", "y",
                                     "--objective", "cv", "--profile-output", profile,
                                     "--profile-grid", "10,20,30,40,50"])
        assert result.exit_code == EXIT_OK, result.output
        assert "bandwidth: " in result.output
        frame = pd.read_csv(profile)
        assert frame["bandwidth"].tolist() == [10, 20, 30, 40, 50]
        assert "gwr_cv" in frame.columns

    def test_gwpca(self, runner, regression_csv, temp_dir):
        """Test GW PCA writes local PTV and a long loadings table"""
        out = os.path.join(temp_dir, "pca.csv")
        result = runner.invoke(cli, ["gwpca", "--input", regression_csv, "--components", "2", "--bw", "25",
                                     "--output", out])
        assert result.exit_code == EXIT_OK, result.output
        assert "PTV_1_to_2" in pd.read_csv(out).columns
        assert os.path.exists(os.path.join(temp_dir, "pca_loadings.csv"))

    def test_gwda(self, runner, class_csv, temp_dir):
        """Test GW discriminant analysis prints a confusion matrix"""
        out = os.path.join(temp_dir, "gwda.csv")
        result = runner.invoke(cli, ["gwda", "--input", class_csv, "--label", "class", "--var", "f1,f2",
                                     "--method", "lda", "--bw", "30", "--output", out])
        assert result.exit_code == EXIT_OK, result.output
        assert "Correct classification rate" in result.output
        frame = pd.read_csv(out)
        assert {"actual", "predicted", "LP_A", "LP_B"} <= set(frame.columns)

    def test_mixed_and_hetero(self, runner, regression_csv):
        """Test the regression extensions run end to end"""
        mixed = runner.invoke(cli, ["gwr-mixed", "--input", regression_csv, "--response", "y",
                                    "--global-var", "x2", "--bw", "25"])
        assert mixed.exit_code == EXIT_OK, mixed.output
        assert "Estimated global variables: x2" in mixed.output
        hetero = runner.invoke(cli, ["gwr-hetero", "--input", regression_csv, "--response", "y", "--bw", "25"])
        assert hetero.exit_code == EXIT_OK, hetero.output

    def test_diag(self, runner, regression_csv, temp_dir):
        """Test collinearity diagnostics"""
        out = os.path.join(temp_dir, "diag.csv")
        result = runner.invoke(cli, ["diag", "--input", regression_csv, "--response", "y", "--bw", "25",
                                     "--output", out])
        assert result.exit_code == EXIT_OK, result.output
        assert {"x1_VIF", "local_CN", "Corr_x1.x2"} <= set(pd.read_csv(out).columns)

    def test_metrics_file(self, runner, regression_csv, temp_dir):
        """Test a Prometheus textfile is written on request"""
        metrics = os.path.join(temp_dir, "run.prom")
        result = runner.invoke(cli, ["gwss", "--input", regression_csv, "--var", "x1", "--bw", "20",
                                     "--metrics-file", metrics])
        assert result.exit_code == EXIT_OK, result.output
        with open(metrics) as f:
            assert "geoweight_local_fits_total" in f.read()

    def test_run_file(self, runner, regression_csv, temp_dir):
        """Test options are read from a YAML run file"""
        config = os.path.join(temp_dir, "run.yaml")
        with open(config, "w") as f:
            f.write(f"input_path: {regression_csv}\nresponse: y\nbandwidth: 25\n")
        result = runner.invoke(cli, ["gwr", "--config", config])
        assert result.exit_code == EXIT_OK, result.output

    def test_failed_bandwidth_search(self, runner, regression_csv):
        """Test a search with no usable bandwidth exits with the numerical failure code"""
        with patch("cli.apps.gw_cli.commands.bw_gwr", side_effect=NoValidBandwidthError("no finite score")):
            result = runner.invoke(cli, ["gwr", "--input", regression_csv, "--response", "y"])
        assert result.exit_code == EXIT_NUMERICAL
        assert "numerical failure" in result.output

    def test_mc_default_simulation_count(self, runner, regression_csv):
        """Test mc runs 99 simulations when --nsim is not given"""
        with patch("cli.apps.gw_cli.commands.montecarlo_gwss", wraps=montecarlo_gwss) as test:
            result = runner.invoke(cli, ["mc", "--input", regression_csv, "--model", "gwss", "--var", "x1",
                                         "--bw", "20", "--seed", "1"])
        assert result.exit_code == EXIT_OK, result.output
        assert test.call_args.args[4] == 99


class TestElectionClasses:
    """Test GW discriminant analysis on classes derived from vote shares"""

    @pytest.fixture
    def election_csv(self, temp_dir):
        rng = np.random.default_rng(8)
        group = np.arange(60) % 3
        frame = pd.DataFrame({
            'X': rng.uniform(0.0, 10.0, size=60),
            'Y': rng.uniform(0.0, 10.0, size=60),
            'f1': 3.0 * group + rng.normal(size=60),
            'f2': rng.normal(size=60) - 2.0 * group,
            'share': np.array([60.0, 50.0, 70.0])[group],
            'winner': np.array(["Bush", "Kerry", "Kerry"])[group],
        })
        path = os.path.join(temp_dir, "election.csv")
        frame.to_csv(path, index=False)
        return path

    def test_borderline_class_derived(self, runner, election_csv, temp_dir):
        """Test winners and Borderline shares become the discriminated classes"""
        out = os.path.join(temp_dir, "election_gwda.csv")
        result = runner.invoke(cli, ["gwda", "--input", election_csv, "--winner-share", "share",
                                     "--winner", "winner", "--method", "lda", "--bw", "60", "--output", out])
        assert result.exit_code == EXIT_OK, result.output
        frame = pd.read_csv(out)
        assert set(frame["actual"]) == {"Bush", "Kerry", "Borderline"}
        assert (frame["actual"] == "Borderline").sum() == 20
        assert {"LP_Borderline", "LP_Bush", "LP_Kerry"} <= set(frame.columns)

    def test_share_needs_winner(self, runner, election_csv):
        """Test a winning share without a winner column is rejected"""
        result = runner.invoke(cli, ["gwda", "--input", election_csv, "--winner-share", "share", "--bw", "60"])
        assert result.exit_code == EXIT_INPUT
