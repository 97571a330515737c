import numpy as np
import pytest
from scipy.special import ndtr
from scipy.stats import rankdata

from adoptions.errors import DegenerateDataError, ValidationError
from adoptions.market_data import LogReturnSeries
from adoptions.stat_tests import (
    SIMILARITY_TESTS,
    acf,
    default_lags,
    gof_frame,
    gof_report,
    ljung_box,
    qq_points,
    rank_tests,
    rejection_rate,
    shapiro_wilk,
    similarity_frame,
    similarity_report,
    std_normal_cdf,
    std_normal_pdf,
)

from conftest import START, dated


@pytest.fixture
def rng():
    return np.random.default_rng(2012)


def ar1(rng, n, phi):
    x = np.zeros(n)
    noise = rng.standard_normal(n)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + noise[i]
    return x


class TestNormalKernel:

    def test_known_values(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_cdf(1.96) == pytest.approx(0.9750021048517795, abs=1e-14)
        assert std_normal_cdf(-8.0) == pytest.approx(6.22096057427178e-16, rel=1e-8)

    def test_symmetry(self):
        x = np.linspace(-6, 6, 101)
        np.testing.assert_allclose(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, atol=1e-15)

    def test_density(self):
        assert std_normal_pdf(0.0) == pytest.approx(1 / np.sqrt(2 * np.pi))


class TestGbmChecks:

    def test_constant_sample_is_degenerate(self):
        assert shapiro_wilk(np.full(20, 0.01)) == 0.0
        assert ljung_box(np.full(20, 0.01), 4) == 0.0

    def test_shapiro_bounds(self):
        with pytest.raises(ValidationError):
            shapiro_wilk(np.arange(7.0))
        with pytest.raises(ValidationError):
            shapiro_wilk(np.arange(5001.0))

    def test_shapiro_rejects_skewed_sample(self, rng):
        assert shapiro_wilk(rng.exponential(size=500)) < 1e-6

    def test_shapiro_accepts_normal_sample(self, rng):
        assert shapiro_wilk(rng.standard_normal(200)) > 1e-3

    def test_ljung_box_detects_dependence(self, rng):
        assert ljung_box(ar1(rng, 500, 0.8), 10) < 1e-6

    def test_ljung_box_lag_bounds(self):
        with pytest.raises(ValidationError):
            ljung_box(np.arange(10.0), 10)
        with pytest.raises(ValidationError):
            ljung_box(np.arange(10.0), 0)

    def test_acf_uses_biased_denominator(self, rng):
        x = rng.standard_normal(50)
        d = x - x.mean()
        lag1 = np.sum(d[1:] * d[:-1]) / np.sum(d * d)
        values = acf(x, 3)
        assert len(values) == 4
        assert values[0] == pytest.approx(1.0)
        assert values[1] == pytest.approx(lag1, rel=1e-10)

    def test_acf_of_constant(self):
        values = acf(np.ones(10), 2)
        assert values[0] == 1.0
        assert np.isnan(values[1:]).all()

    @pytest.mark.parametrize(("n", "lags"), [(3, 1), (30, 6), (31, 6), (100, 10), (1000, 10)])
    def test_default_lags(self, n, lags):
        assert default_lags(n) == lags

    def test_gof_report(self, rng):
        returns = LogReturnSeries("k", dated(START, 30), 0.02 * rng.standard_normal(30))
        report = gof_report(returns)
        assert report.keyword_id == "k"
        assert report.lags == 6
        assert len(report.acf) == 7
        assert report.gbm_ok == (report.shapiro_wilk_p > 0.05 and report.ljung_box_p > 0.05)
        assert not report.degenerate

    def test_gof_report_of_flat_keyword(self):
        report = gof_report(LogReturnSeries("flat", dated(START, 20), np.zeros(20)))
        assert report.degenerate
        assert not report.gbm_ok

    def test_gof_frame(self, rng):
        returns = LogReturnSeries("k", dated(START, 30), rng.standard_normal(30))
        frame = gof_frame([gof_report(returns, lags=3)])
        assert list(frame.columns) == ["keyword", "sw_p", "lb_p", "gbm_ok", "lags", "degenerate"]
        assert frame["lags"].iloc[0] == 3

    def test_qq_points(self, rng):
        x = rng.standard_normal(25)
        frame = qq_points(x)
        assert len(frame) == 25
        np.testing.assert_array_equal(frame["sample"], np.sort(x))
        np.testing.assert_allclose(frame["theoretical"], -frame["theoretical"][::-1].to_numpy(), atol=1e-12)


class TestRankTests:

    def test_location_shift_is_rejected(self, rng):
        result = rank_tests(rng.standard_normal(60), rng.standard_normal(60) + 3.0)
        assert result.wilcoxon_p < 1e-6
        assert result.ks_p < 1e-6

    def test_scale_difference_is_rejected(self, rng):
        result = rank_tests(rng.standard_normal(200), 6.0 * rng.standard_normal(200))
        assert result.ansari_bradley_p < 1e-6

    def test_ansari_bradley_normal_approximation_for_large_samples(self, rng):
        a, b = rng.standard_normal(60), 1.3 * rng.standard_normal(60)
        N = 120
        ranks = rankdata(np.concatenate((a, b)))
        statistic = np.minimum(ranks, N - ranks + 1)[:60].sum()
        mean = 60 * (N + 2) / 4
        var = 60 * 60 * (N + 2) * (N - 2) / (48 * (N - 1))
        z = (statistic - mean) / np.sqrt(var)
        assert rank_tests(a, b).ansari_bradley_p == pytest.approx(2 * ndtr(-abs(z)), rel=1e-9)

    def test_identical_samples_are_not_rejected(self, rng):
        x = rng.standard_normal(40)
        result = rank_tests(x, x.copy())
        assert result.wilcoxon_p == pytest.approx(1.0)
        assert result.ks_statistic == 0.0
        assert set(result.p_values()) == set(SIMILARITY_TESTS)

    def test_all_ties(self):
        with pytest.raises(DegenerateDataError):
            rank_tests(np.ones(10), np.ones(12))

    def test_too_few_points(self, rng):
        with pytest.raises(ValidationError):
            rank_tests(rng.standard_normal(7), rng.standard_normal(30))

    def test_similarity_report_averages_paths(self, rng):
        actual = rng.standard_normal(30)
        simulated = rng.standard_normal((20, 30))
        report = similarity_report(actual, simulated, keyword_id="k", model="GBM")
        expected = np.mean([rank_tests(actual, row).ks_p for row in simulated])
        assert report.ks_p == pytest.approx(expected)
        assert report.n_simulations == 20
        for name in SIMILARITY_TESTS:
            assert 0.0 <= report.fraction_not_rejected[name] <= 1.0

    def test_similarity_of_shifted_model(self, rng):
        actual = rng.standard_normal(50)
        report = similarity_report(actual, rng.standard_normal((10, 50)) + 5.0)
        assert report.fraction_not_rejected["wilcoxon"] == 0.0

    def test_similarity_frame(self, rng):
        report = similarity_report(rng.standard_normal(30), rng.standard_normal((3, 30)), keyword_id="k", model="CIR")
        frame = similarity_frame([report])
        assert list(frame.columns) == ["keyword", "model", "test", "frac_not_rejected"]
        assert list(frame["test"]) == list(SIMILARITY_TESTS)

    def test_rejection_rate(self):
        assert rejection_rate([0.01, 0.2, 0.05, 0.5]) == 0.5


@pytest.mark.slow
class TestSize:

    TRIALS = 10_000

    def test_shapiro_size(self, rng):
        p = [shapiro_wilk(rng.standard_normal(30)) for _ in range(self.TRIALS)]
        assert rejection_rate(p) == pytest.approx(0.05, abs=0.015)

    def test_ljung_box_size(self, rng):
        p = [ljung_box(rng.standard_normal(500), 10) for _ in range(self.TRIALS)]
        assert rejection_rate(p) == pytest.approx(0.05, abs=0.015)

    def test_rank_test_size(self, rng):
        results = [rank_tests(rng.standard_normal(200), rng.standard_normal(200)) for _ in range(self.TRIALS)]
        for name in SIMILARITY_TESTS:
            assert rejection_rate([res.p_values()[name] for res in results]) == pytest.approx(0.05, abs=0.015)


class TestPower:

    TRIALS = 200

    def test_shapiro_rejects_heavy_tails(self, rng):
        p = [shapiro_wilk(rng.standard_cauchy(100)) for _ in range(self.TRIALS)]
        assert rejection_rate(p) > 0.9

    def test_ljung_box_rejects_ar1(self, rng):
        p = [ljung_box(ar1(rng, 200, 0.8), 10) for _ in range(self.TRIALS)]
        assert rejection_rate(p) > 0.95

    def test_wilcoxon_and_ks_reject_location_shift(self, rng):
        results = [rank_tests(rng.standard_normal(100), rng.standard_normal(100) + 1.0) for _ in range(self.TRIALS)]
        assert rejection_rate([res.wilcoxon_p for res in results]) > 0.99
        assert rejection_rate([res.ks_p for res in results]) > 0.9

    def test_ansari_bradley_rejects_scale_change(self, rng):
        results = [rank_tests(rng.standard_normal(100), 2.0 * rng.standard_normal(100)) for _ in range(self.TRIALS)]
        assert rejection_rate([res.ansari_bradley_p for res in results]) > 0.9
