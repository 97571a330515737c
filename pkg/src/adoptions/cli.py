"""Command-line front end: one sub-command per experiment, CSV reports out.

Usage::

    adoptions price -c configs/examples/price_3kw.yml -o out/price
    adoptions backtest -c configs/examples/backtest_gbm.yml --seed 7 -v

Every command writes its CSV reports plus a `manifest.json` into the output
directory. Exit codes: 0 success, 2 invalid input, 3 degenerate data.
"""

import argparse
import sys

import numpy as np
import pandas as pd

from . import calibration, hedging, market_data, pricing, revenue, sde_engine, stat_tests
from .calibration import CorrMatrix
from .config import COMMANDS, Config
from .errors import EXIT_OK, AdOptionsError, EmptyKeywordSetError
from .log import get_logger, setup_logging
from .reports import write_csv, write_manifest
from .utils import days_to_years, derive_seed


log = get_logger(__name__)


# argparser stuff:
PARSER = argparse.ArgumentParser(
prog='adoptions',
description="""\
Price, hedge and analyse multi-keyword multi-click ad options.
"""
)
PARSER.add_argument('command', choices=COMMANDS, help='Experiment to run.')
PARSER.add_argument('-c', '--config', help='Path to a YAML run config.')
PARSER.add_argument('-i', '--input', help='Path to a keyword CPC CSV (overrides the config).')
PARSER.add_argument('-o', '--output-dir', dest='output_dir', help='Directory for reports.')
PARSER.add_argument('-s', '--seed', type=int, help='Master random seed.')
PARSER.add_argument('-w', '--workers', type=int, help='Threads for noise generation.')
PARSER.add_argument('-v', '--verbose', action='store_true', default=None)



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ MAIN ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def main(argv=None) -> int:
    """Parse arguments, run one command, and return its exit code."""
    args = PARSER.parse_args(argv)
    setup_logging(verbose=bool(args.verbose))
    try:
        config = Config(
            args.config,
            command=args.command,
            input=args.input,
            output_dir=args.output_dir,
            seed=args.seed,
            workers=args.workers,
            verbose=args.verbose,
        )
        setup_logging(verbose=config["verbose"])
        outputs, seeds = COMMAND_TABLE[config["command"]](config)
        write_manifest(config["output_dir"], config, outputs, seeds)
    except AdOptionsError as err:
        log.error("%s", err)
        return err.exit_code
    log.info("%s finished", args.command)
    return EXIT_OK



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Helpers ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def _window(config, role: str) -> market_data.DataWindow:
    prefix = "train" if role == "training" else "test"
    config.require(f"{prefix}_start", f"{prefix}_end")
    return market_data.DataWindow(role, config[f"{prefix}_start"], config[f"{prefix}_end"])


def _load(config, role: str | None = None) -> tuple[list, list]:
    """Load the configured keywords for a window; rejections are written as a report."""
    config.require("input")
    role = role or config["calibration_window"]
    series, rejections = market_data.load_series(config["input"], _window(config, role))

    if config["keywords"]:
        by_id = {item.keyword_id: item for item in series}
        missing = [kw for kw in config["keywords"] if kw not in by_id]
        rejections += [market_data.Rejection(kw, "not loaded") for kw in missing if kw not in {r.keyword for r in rejections}]
        series = [by_id[kw] for kw in config["keywords"] if kw in by_id]

    if not series:
        msg = f"no keyword in '{config['input']}' survived loading for the {role} window"
        raise EmptyKeywordSetError(msg)
    return series, rejections


def _rejection_frame(rejections) -> pd.DataFrame:
    return pd.DataFrame([[rej.keyword, rej.reason] for rej in rejections], columns=["keyword", "reason"])


def _corr_from_config(config, ids) -> CorrMatrix:
    if config["corr"] is None:
        return CorrMatrix.identity(len(ids), ids)
    return CorrMatrix.from_value(config["corr"], len(ids), ids)


def _market(config):
    """Keyword ids, C(0), sigma, corr, and the calibration (None without data).

    With an `input` file the parameters are calibrated on the calibration window
    and C(0) defaults to the last observed CPC; otherwise `keywords`, `c0` and
    `sigma` come straight from the config.
    """
    if config["input"] is not None:
        series, _ = _load(config)
        cal = calibration.calibrate(series)
        c0 = np.asarray(config["c0"], dtype=float) if config["c0"] is not None else cal.c_last
        return cal.keyword_ids, c0, cal.sigma, cal.corr, cal

    config.require("keywords", "c0", "sigma")
    ids = tuple(config["keywords"])
    return ids, np.asarray(config["c0"], dtype=float), np.asarray(config["sigma"], dtype=float), _corr_from_config(config, ids), None


def _option_spec(config, keyword_ids, F=None) -> pricing.OptionSpec:
    if F is None:
        config.require("F")
        F = config["F"]
    weights = None
    if config["match"] == "broad":
        config.require("weights")
        weights = pricing.broad_weights(config["weights"], keyword_ids)
    return pricing.OptionSpec(
        keywords=keyword_ids,
        F=F,
        m=config["m"],
        T=days_to_years(config["T_days"]),
        r=config["r"],
        match=config["match"],
        weights=weights,
    )


def _sde_model(config, c0, sigma, cal) -> sde_engine.SdeModel:
    """Real-world dynamics: calibrated when data is given, else drift r / level C(0)."""
    if cal is not None:
        return sde_engine.SdeModel.from_calibration(cal, config["model"], config["k"])
    kind = config["model"]
    mu = c0 if kind in sde_engine.MEAN_REVERTING else np.full(len(sigma), config["r"])
    return sde_engine.SdeModel(kind, mu, sigma, np.full(len(sigma), config["k"]))



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Commands ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def cmd_calibrate(config):
    """Estimate mu, sigma and the correlation matrix for the calibration window."""
    out = config["output_dir"]
    try:
        series, rejections = _load(config)
    except EmptyKeywordSetError:
        write_csv(calibration.params_frame([]), out, "params.csv")
        raise

    cal = calibration.calibrate(series)
    if cal.psd_repaired:
        log.warning("correlation matrix was repaired to the nearest PSD matrix")
    outputs = [
        write_csv(calibration.params_frame(cal.params), out, "params.csv"),
        write_csv(calibration.corr_frame(cal.corr), out, "corr.csv", index=True),
        write_csv(_rejection_frame(rejections), out, "rejections.csv"),
    ]
    log.info("calibrated %d keyword(s)", len(cal.params))
    return outputs, {}


def cmd_gof(config):
    """GBM validation per keyword: Shapiro-Wilk, Ljung-Box, ACF and Q-Q data."""
    out = config["output_dir"]
    series, rejections = _load(config)
    reports, acf_rows, qq_frames = [], [], []
    for item in series:
        returns = market_data.log_returns(item)
        rep = stat_tests.gof_report(returns, config["alpha_level"], config["lb_lags"])
        reports.append(rep)
        acf_rows += [[item.keyword_id, lag, value] for lag, value in enumerate(rep.acf)]
        qq = stat_tests.qq_points(returns.returns)
        qq.insert(0, "keyword", item.keyword_id)
        qq_frames.append(qq)

    outputs = [
        write_csv(stat_tests.gof_frame(reports), out, "gof.csv"),
        write_csv(pd.DataFrame(acf_rows, columns=["keyword", "lag", "acf"]), out, "acf.csv"),
        write_csv(pd.concat(qq_frames, ignore_index=True), out, "qq.csv"),
        write_csv(_rejection_frame(rejections), out, "rejections.csv"),
    ]
    passed = sum(rep.gbm_ok for rep in reports)
    log.info("%d of %d keyword(s) pass both GBM conditions", passed, len(reports))
    return outputs, {}


def cmd_price(config):
    """Quote the option; a closed-form or quadrature quote is paired with an MC cross-check."""
    ids, c0, sigma, corr, _ = _market(config)
    spec = _option_spec(config, ids)
    seed = config["seed"]
    options = {"n_paths": config["n_paths"], "seed": seed, "antithetic": config["antithetic"], "workers": config["workers"]}

    quotes = [pricing.price(spec, c0, sigma, corr, config["method"], **options)]
    if quotes[0].method != "mc":
        quotes.append(pricing.price(spec, c0, sigma, corr, "mc", **options))
    for quote in quotes:
        log.info("%s: pi = %.6f (per click %.6f, stderr %.2g)", quote.method, quote.pi, quote.per_click, quote.mc_std_error)

    outputs = [write_csv(pricing.quote_frame(quotes), config["output_dir"], "quotes.csv")]
    return outputs, {"seed": seed}


def _backtest_options(config) -> dict:
    return {
        "method": config["method"],
        "n_paths": config["n_paths"],
        "n_delta_paths": config["n_delta_paths"],
        "epsilon": config["epsilon"],
        "d_conv": config["d_conv"],
        "rate_scale": config["rate_scale"],
    }


def cmd_backtest(config):
    """Delta-hedging backtest.

    A GBM run with data hedges along the observed test window. Every other run
    backtests `n_trials` paths simulated from `model`, calibrated on the
    calibration window when data is given.
    """
    out = config["output_dir"]
    seed = config["seed"]

    if config["input"] is not None and config["model"] == "GBM":
        series, _ = _load(config)
        test, _ = _load(config, "test")
        cal = calibration.calibrate(series)
        by_id = {item.keyword_id: item for item in test}
        path = market_data.cpc_matrix([by_id[kw] for kw in cal.keyword_ids if kw in by_id])
        spec = _option_spec(config, cal.keyword_ids)
        reports = [hedging.backtest_hedge(spec, path, cal.sigma, cal.corr, seed=seed, **_backtest_options(config))]
        seeds = {"seed": seed}
    else:
        ids, c0, sigma, corr, cal = _market(config)
        spec = _option_spec(config, ids)
        model = _sde_model(config, c0, sigma, cal)
        log.info("backtesting %d %s trial(s)", config["n_trials"], model.kind)
        summary = hedging.backtest_trials(
            spec, c0, model, corr, config["n_trials"], seed, pricing_sigma=sigma, **_backtest_options(config),
        )
        reports = list(summary.reports)
        seeds = {"seed": seed, "trial_seeds": [derive_seed(seed, t) for t in range(config["n_trials"])]}

    verdicts = pd.Series([rep.verdict for rep in reports])
    summary_rows = pd.DataFrame({
        "verdict": hedging.VERDICTS,
        "fraction": [float((verdicts == v).mean()) for v in hedging.VERDICTS],
    })
    outputs = [
        write_csv(hedging.backtest_frame(reports), out, "backtest.csv"),
        write_csv(hedging.trace_frame(reports[0]), out, "trace.csv"),
        write_csv(summary_rows, out, "backtest_summary.csv"),
    ]
    return outputs, seeds


def cmd_revenue(config):
    """Revenue difference over a grid of fixed CPCs around each forward level."""
    out = config["output_dir"]
    ids, c0, sigma, corr, _ = _market(config)
    # the grid replaces F; without one the OptionSpec carries the forward levels
    F = config["F"] if config["F"] is not None else pricing.forward_expectation(c0, sigma, config["r"], days_to_years(config["T_days"]))
    spec = _option_spec(config, ids, F)
    seed = config["seed"]

    reference = (spec.weights if spec.match == "broad" else np.eye(spec.n)) @ pricing.forward_expectation(c0, sigma, spec.r, spec.T)
    axes = revenue.make_axes(reference, config["grid_low"], config["grid_high"], config["grid_points"])
    curve = revenue.revenue_surface(
        spec, c0, sigma, corr, axes, config["n_paths"], seed, method=config["method"], antithetic=config["antithetic"],
    )
    diagonal = np.column_stack(axes)
    prices = revenue.option_price_curve(
        spec, c0, sigma, corr, diagonal, n_paths=config["n_paths"], seed=seed, workers=config["workers"],
    )
    outputs = [
        write_csv(revenue.surface_frame(curve), out, "surface.csv"),
        write_csv(revenue.summary_frame(curve), out, "revenue_summary.csv"),
        write_csv(prices, out, "price_curve.csv"),
    ]
    return outputs, {"seed": seed}


def cmd_simulate(config):
    """Dump real-world sample paths, the daily payoff trace, and its daily mean."""
    out = config["output_dir"]
    ids, c0, sigma, corr, cal = _market(config)
    model = _sde_model(config, c0, sigma, cal)
    seed = config["seed"]
    paths = sde_engine.simulate_path(
        c0, model, corr, days_to_years(config["T_days"]), config["n_steps"], sde_engine.DriftMode.real(),
        config["n_paths"], seed, antithetic=config["antithetic"], workers=config["workers"],
    )
    outputs = [write_csv(sde_engine.paths_frame(paths, ids), out, "paths.csv")]

    if config["F"] is not None:
        spec = _option_spec(config, ids)
        trace = spec.payoff(paths.values)
        frame = pd.DataFrame({
            "path": np.repeat(np.arange(paths.n_paths), paths.n_steps + 1),
            "step": np.tile(np.arange(paths.n_steps + 1), paths.n_paths),
            "payoff": trace.ravel(),
        })
        mean = pd.DataFrame({"step": np.arange(paths.n_steps + 1), "mean_payoff": trace.mean(axis=0)})
        outputs += [write_csv(frame, out, "payoff_trace.csv"), write_csv(mean, out, "payoff_mean.csv")]
    return outputs, {"seed": seed}


def cmd_similarity(config):
    """Compare each keyword's observed series with simulated paths of every model."""
    series, _ = _load(config)
    cal = calibration.calibrate(series)
    n_days = len(series[0])
    horizon = days_to_years(n_days - 1)
    reports = []
    for kind in sde_engine.MODEL_KINDS:
        model = sde_engine.SdeModel.from_calibration(cal, kind, config["k"])
        first = np.array([item.cpc[0] for item in series])
        paths = sde_engine.simulate_path(
            first, model, cal.corr, horizon, n_days - 1, sde_engine.DriftMode.real(),
            config["n_similarity"], config["seed"], workers=config["workers"],
        )
        for i, item in enumerate(series):
            reports.append(stat_tests.similarity_report(
                item.cpc, paths.values[:, :, i], keyword_id=item.keyword_id, model=kind, alpha=config["alpha_level"],
            ))

    outputs = [write_csv(stat_tests.similarity_frame(reports), config["output_dir"], "similarity.csv")]
    return outputs, {"seed": config["seed"]}


COMMAND_TABLE = {
    "calibrate": cmd_calibrate,
    "gof": cmd_gof,
    "price": cmd_price,
    "backtest": cmd_backtest,
    "revenue": cmd_revenue,
    "simulate": cmd_simulate,
    "similarity": cmd_similarity,
}


if __name__ == "__main__":
    sys.exit(main())
