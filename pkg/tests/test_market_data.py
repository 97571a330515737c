import datetime

import numpy as np
import pytest

from adoptions.calibration import estimate_sigma
from adoptions.errors import MalformedRowError, SeriesTooShortError, ValidationError
from adoptions.market_data import (
    MIN_RETURNS,
    MIN_WINDOW_OBSERVATIONS,
    REASON_DUPLICATE,
    REASON_GAP,
    REASON_NON_POSITIVE,
    REASON_ZERO_CPC,
    DataWindow,
    KeywordSeries,
    cpc_matrix,
    load_series,
    log_returns,
    read_cpc_csv,
    reconstruct_cpc,
    window_slice,
)
from adoptions.stat_tests import shapiro_wilk

from conftest import START, dated, gbm_cpc


WINDOW = DataWindow("training", START, START + datetime.timedelta(days=19))


class TestLoadSeries:

    def test_clean_keywords_load_in_file_order(self, write_cpc_csv):
        path = write_cpc_csv({"b": gbm_cpc(20, 3.0, 0.2, seed=1), "a": gbm_cpc(20, 4.0, 0.2, seed=2)})
        series, rejections = load_series(path, WINDOW)
        assert [s.keyword_id for s in series] == ["b", "a"]
        assert rejections == []
        assert len(series[0]) == 20
        assert series[0].dates[0] == START

    def test_zero_cpc_keyword_is_rejected(self, write_cpc_csv):
        path = write_cpc_csv({"ok": gbm_cpc(20, 3.0, 0.2), "dead": np.zeros(20)})
        series, rejections = load_series(path, WINDOW)
        assert [s.keyword_id for s in series] == ["ok"]
        assert [(r.keyword, r.reason) for r in rejections] == [("dead", REASON_ZERO_CPC)]

    def test_partly_zero_keyword_is_non_positive(self, write_cpc_csv):
        values = gbm_cpc(20, 3.0, 0.2)
        values[5] = 0.0
        _, rejections = load_series(write_cpc_csv({"x": values}), WINDOW)
        assert rejections[0].reason == REASON_NON_POSITIVE

    def test_gap_is_rejected(self, write_cpc_csv):
        path = write_cpc_csv({"short": gbm_cpc(15, 3.0, 0.2)})
        series, rejections = load_series(path, WINDOW)
        assert series == []
        assert rejections[0].reason == REASON_GAP

    def test_duplicate_date_is_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        lines = ["keyword,date,cpc"]
        lines += [f"k,{day.isoformat()},3.5" for day in dated(START, 20)]
        lines.append(f"k,{START.isoformat()},3.6")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        _, rejections = load_series(str(path), WINDOW)
        assert rejections[0].reason == REASON_DUPLICATE

    def test_rejections_are_sorted(self, write_cpc_csv):
        path = write_cpc_csv({"zz": np.zeros(20), "aa": np.zeros(20)})
        _, rejections = load_series(path, WINDOW)
        assert [r.keyword for r in rejections] == ["aa", "zz"]

    def test_rows_outside_window_are_ignored(self, write_cpc_csv):
        path = write_cpc_csv({"long": gbm_cpc(40, 3.0, 0.2)})
        series, _ = load_series(path, WINDOW)
        assert len(series[0]) == WINDOW.n_days


class TestReadCsv:

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("keyword,date,cpc\nk,2012-01-01,3.5\nk,2012-01-02,abc\n", encoding="utf-8")
        with pytest.raises(MalformedRowError, match="row 3"):
            read_cpc_csv(str(path))

    def test_bad_date_is_malformed(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("keyword,date,cpc\nk,01/02/2012,3.5\n", encoding="utf-8")
        with pytest.raises(MalformedRowError):
            read_cpc_csv(str(path))

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("name,day,price\nk,2012-01-01,3.5\n", encoding="utf-8")
        with pytest.raises(MalformedRowError, match="header"):
            read_cpc_csv(str(path))

    def test_malformed_row_exit_code(self):
        assert MalformedRowError.exit_code == 2


class TestTypes:

    def test_window_too_short(self):
        with pytest.raises(ValidationError):
            DataWindow("training", START, START + datetime.timedelta(days=3))

    def test_eight_day_window_is_too_short(self):
        with pytest.raises(ValidationError):
            DataWindow("training", START, START + datetime.timedelta(days=7))

    def test_shortest_window_supports_calibration_and_tests(self, write_cpc_csv):
        window = DataWindow("training", START, START + datetime.timedelta(days=MIN_WINDOW_OBSERVATIONS - 1))
        path = write_cpc_csv({"k": gbm_cpc(MIN_WINDOW_OBSERVATIONS, 3.0, 0.2, seed=4)})
        series, _ = load_series(path, window)
        returns = log_returns(series[0])
        assert len(returns.returns) == MIN_RETURNS
        assert estimate_sigma(returns).sigma > 0
        assert 0.0 <= shapiro_wilk(returns.returns) <= 1.0

    def test_window_bad_role(self):
        with pytest.raises(ValidationError):
            DataWindow("holdout", START, START + datetime.timedelta(days=30))

    def test_window_days_inclusive(self):
        assert WINDOW.n_days == 20
        assert WINDOW.days()[-1] == START + datetime.timedelta(days=19)

    def test_series_rejects_non_positive(self):
        with pytest.raises(ValidationError):
            KeywordSeries("k", dated(START, 3), [1.0, -1.0, 2.0])

    def test_series_rejects_unsorted_dates(self):
        days = dated(START, 3)
        with pytest.raises(ValidationError):
            KeywordSeries("k", [days[1], days[0], days[2]], [1.0, 1.0, 2.0])

    def test_series_values_are_read_only(self):
        series = KeywordSeries("k", dated(START, 3), [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            series.cpc[0] = 5.0


class TestTransformations:

    def test_log_returns_invert(self):
        values = gbm_cpc(30, 3.5, 0.3, seed=4)
        series = KeywordSeries("k", dated(START, 30), values)
        returns = log_returns(series)
        assert len(returns) == 29
        assert returns.dates[0] == START + datetime.timedelta(days=1)
        np.testing.assert_allclose(reconstruct_cpc(values[0], returns), values, rtol=1e-12)

    def test_log_returns_need_two_points(self):
        with pytest.raises(SeriesTooShortError):
            log_returns(KeywordSeries("k", [START], [1.0]))

    def test_window_slice(self):
        series = KeywordSeries("k", dated(START, 30), gbm_cpc(30, 3.5, 0.3))
        sliced = window_slice(series, WINDOW)
        assert len(sliced) == 20
        assert sliced.dates[-1] == WINDOW.end

    def test_cpc_matrix_stacks_columns(self):
        a = KeywordSeries("a", dated(START, 5), [1, 2, 3, 4, 5])
        b = KeywordSeries("b", dated(START, 5), [5, 4, 3, 2, 1])
        matrix = cpc_matrix([a, b])
        assert matrix.shape == (5, 2)
        assert matrix[0, 1] == 5

    def test_cpc_matrix_misaligned(self):
        a = KeywordSeries("a", dated(START, 5), [1, 2, 3, 4, 5])
        b = KeywordSeries("b", dated(START + datetime.timedelta(days=1), 5), [1, 2, 3, 4, 5])
        with pytest.raises(ValidationError):
            cpc_matrix([a, b])
