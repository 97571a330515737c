import json
import os

import numpy as np
import pandas as pd
import pytest

from adoptions.cli import main

from conftest import gbm_cpc


TRAIN = {"train_start": "2012-01-01", "train_end": "2012-01-31"}
TEST = {"test_start": "2012-02-01", "test_end": "2012-03-02"}

MARKET_3KW = {
    "keywords": ["k1", "k2", "k3"],
    "c0": [3.5, 4.5, 6.0],
    "sigma": [0.2263, 0.3, 0.25],
    "corr": [[1.0, 0.2247, 0.1], [0.2247, 1.0, 0.3], [0.1, 0.3, 1.0]],
    "F": [3.8505, 4.6704, 6.2520],
    "m": 100,
}


@pytest.fixture
def cpc_file(write_cpc_csv):
    return write_cpc_csv({
        "canon cameras": gbm_cpc(62, 3.5, 0.2263, seed=1),
        "nikon cameras": gbm_cpc(62, 4.5, 0.3, seed=2),
        "dead keyword": np.zeros(62),
    })


def run(args, out):
    return main([*args, "-o", str(out)])


def read(out, name):
    return pd.read_csv(os.path.join(out, name))


class TestCalibrate:

    def test_writes_params_and_rejections(self, cpc_file, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config(TRAIN)
        assert run(["calibrate", "-c", config, "-i", cpc_file], out) == 0
        params = read(out, "params.csv")
        assert list(params["keyword"]) == ["canon cameras", "nikon cameras"]
        assert list(read(out, "rejections.csv")["keyword"]) == ["dead keyword"]
        assert read(out, "corr.csv").shape == (2, 3)
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "calibrate"
        assert "params.csv" in manifest["outputs"]

    def test_empty_keyword_set(self, write_cpc_csv, write_config, tmp_path):
        out = tmp_path / "out"
        data = write_cpc_csv({"dead": np.zeros(31)})
        assert run(["calibrate", "-c", write_config(TRAIN), "-i", data], out) == 3
        assert read(out, "params.csv").empty

    def test_missing_window(self, cpc_file, tmp_path):
        assert run(["calibrate", "-i", cpc_file], tmp_path / "out") == 2


class TestGof:

    def test_one_row_per_keyword(self, cpc_file, write_config, tmp_path):
        out = tmp_path / "out"
        assert run(["gof", "-c", write_config(TRAIN), "-i", cpc_file], out) == 0
        gof = read(out, "gof.csv")
        assert list(gof.columns[:4]) == ["keyword", "sw_p", "lb_p", "gbm_ok"]
        assert len(gof) == 2
        assert set(read(out, "qq.csv")["keyword"]) == {"canon cameras", "nikon cameras"}


class TestPrice:

    def test_three_keywords(self, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config({**MARKET_3KW, "n_paths": 20_000})
        assert run(["price", "-c", config], out) == 0
        quotes = read(out, "quotes.csv")
        assert list(quotes["method"]) == ["mc"]
        assert quotes["pi"][0] == pytest.approx(100 * quotes["per_click"][0], rel=1e-9)

    def test_closed_form_is_cross_checked(self, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config({"keywords": ["k"], "c0": [3.5], "sigma": [0.2263], "F": [3.8505], "n_paths": 50_000})
        assert run(["price", "-c", config], out) == 0
        quotes = read(out, "quotes.csv")
        assert list(quotes["method"]) == ["bsm_closed", "mc"]
        assert abs(quotes["per_click"][0] - quotes["per_click"][1]) < 4 * quotes["stderr"][1]

    def test_zero_clicks_is_rejected(self, write_config, tmp_path):
        config = write_config({**MARKET_3KW, "m": 0})
        assert run(["price", "-c", config], tmp_path / "out") == 2

    def test_missing_market(self, write_config, tmp_path):
        config = write_config({"F": [3.0]})
        assert run(["price", "-c", config], tmp_path / "out") == 2

    def test_perfect_correlation_falls_back_to_mc(self, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config({
            "keywords": ["a", "b"], "c0": [3.5, 4.5], "sigma": [0.2263, 0.3], "F": [3.8505, 4.6704],
            "corr": 1.0, "n_paths": 10_000,
        })
        assert run(["price", "-c", config], out) == 0
        assert list(read(out, "quotes.csv")["method"]) == ["mc"]


REPRODUCIBLE_RUNS = {
    "simulate": ({**MARKET_3KW, "n_paths": 5000, "n_steps": 5}, ["paths.csv", "payoff_trace.csv"]),
    "price": ({**MARKET_3KW, "n_paths": 5000}, ["quotes.csv"]),
    "backtest": (
        {"keywords": ["k"], "c0": [3.5], "sigma": [0.2263], "F": [3.5], "m": 100, "n_trials": 3},
        ["backtest.csv", "trace.csv"],
    ),
    "revenue": (
        {"keywords": ["k"], "c0": [3.5], "sigma": [0.2263], "grid_points": 5, "n_paths": 2000},
        ["surface.csv", "price_curve.csv"],
    ),
}


class TestReproducibility:

    @pytest.mark.parametrize("command", sorted(REPRODUCIBLE_RUNS))
    def test_byte_identical_across_runs_and_workers(self, command, write_config, tmp_path):
        values, reports = REPRODUCIBLE_RUNS[command]
        config = write_config(values)
        assert run([command, "-c", config], tmp_path / "a") == 0
        assert run([command, "-c", config], tmp_path / "b") == 0
        assert run([command, "-c", config, "-w", "3"], tmp_path / "c") == 0
        for name in [*reports, "manifest.json"]:
            first = (tmp_path / "a" / name).read_bytes()
            assert first == (tmp_path / "b" / name).read_bytes(), name
            assert first == (tmp_path / "c" / name).read_bytes(), name


class TestSimulate:

    def test_payoff_trace(self, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config({**MARKET_3KW, "n_paths": 10, "n_steps": 4, "model": "CIR"})
        assert run(["simulate", "-c", config], out) == 0
        assert len(read(out, "paths.csv")) == 10 * 5 * 3
        assert len(read(out, "payoff_trace.csv")) == 10 * 5
        assert list(read(out, "payoff_mean.csv")["step"]) == [0, 1, 2, 3, 4]

    def test_seed_flag_changes_paths(self, write_config, tmp_path):
        config = write_config({**MARKET_3KW, "n_paths": 10, "n_steps": 2})
        assert run(["simulate", "-c", config, "-s", "1"], tmp_path / "a") == 0
        assert run(["simulate", "-c", config, "-s", "2"], tmp_path / "b") == 0
        assert (tmp_path / "a" / "paths.csv").read_bytes() != (tmp_path / "b" / "paths.csv").read_bytes()

    def test_unknown_model(self, write_config, tmp_path):
        config = write_config({**MARKET_3KW, "model": "heston"})
        assert run(["simulate", "-c", config], tmp_path / "out") == 2


class TestBacktest:

    def test_synthetic_trials(self, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config({"keywords": ["k"], "c0": [3.5], "sigma": [0.2263], "F": [2.8], "m": 100, "n_trials": 3})
        assert run(["backtest", "-c", config], out) == 0
        assert len(read(out, "backtest.csv")) == 3
        assert len(read(out, "trace.csv")) == 32
        summary = read(out, "backtest_summary.csv")
        assert summary["fraction"].sum() == pytest.approx(1.0)
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert len(manifest["seeds"]["trial_seeds"]) == 3

    def test_observed_test_window(self, write_cpc_csv, write_config, tmp_path):
        out = tmp_path / "out"
        data = write_cpc_csv({"canon cameras": gbm_cpc(62, 3.5, 0.2263, seed=1)})
        config = write_config({**TRAIN, **TEST, "F": [2.8], "m": 100})
        assert run(["backtest", "-c", config, "-i", data], out) == 0
        assert len(read(out, "backtest.csv")) == 1
        assert len(read(out, "trace.csv")) == 31

    def test_calibrated_cir_trials(self, write_cpc_csv, write_config, tmp_path):
        out = tmp_path / "out"
        data = write_cpc_csv({"canon cameras": gbm_cpc(62, 3.5, 0.2263, seed=1)})
        config = write_config({
            **TRAIN, **TEST, "calibration_window": "test", "model": "CIR", "F": [3.5], "m": 100, "n_trials": 4,
        })
        assert run(["backtest", "-c", config, "-i", data], out) == 0
        assert len(read(out, "backtest.csv")) == 4
        assert len(read(out, "trace.csv")) == 32
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert len(manifest["seeds"]["trial_seeds"]) == 4

    def test_calibrated_trials_need_the_calibration_window(self, write_cpc_csv, write_config, tmp_path):
        data = write_cpc_csv({"canon cameras": gbm_cpc(62, 3.5, 0.2263, seed=1)})
        config = write_config({**TRAIN, "calibration_window": "test", "model": "MRD", "F": [3.5]})
        assert run(["backtest", "-c", config, "-i", data], tmp_path / "out") == 2


class TestRevenue:

    def test_one_keyword_grid(self, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config({"keywords": ["k"], "c0": [3.5], "sigma": [0.2263], "grid_points": 11, "grid_low": 0.5, "grid_high": 1.5})
        assert run(["revenue", "-c", config], out) == 0
        surface = read(out, "surface.csv")
        assert len(surface) == 11
        assert (surface["D"] > 0).all()
        assert list(read(out, "revenue_summary.csv")["point"]) == ["argmax", "reference"]
        assert len(read(out, "price_curve.csv")) == 11


class TestSimilarity:

    def test_every_model_and_test(self, write_cpc_csv, write_config, tmp_path):
        out = tmp_path / "out"
        data = write_cpc_csv({"canon cameras": gbm_cpc(31, 3.5, 0.2263, seed=1)})
        config = write_config({**TRAIN, "n_similarity": 10})
        assert run(["similarity", "-c", config, "-i", data], out) == 0
        frame = read(out, "similarity.csv")
        assert len(frame) == 5 * 3
        assert set(frame["model"]) == {"GBM", "CEV", "MRD", "CIR", "HWV"}
        assert frame["frac_not_rejected"].between(0, 1).all()
