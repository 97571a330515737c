"""Hedging deltas, the value-difference process, and arbitrage classification.

A seller who holds the option value V and is short Delta_i units of each
keyword's CPC carries Pi(t) = m (V(t) - sum_i Delta_i(t) C_i(t)), rebalanced
daily: over each day Pi moves with the hedge set the day before. When the
option is fairly priced Pi grows like a risk-less deposit, so its growth
rate over a window is compared with the benchmark rate r~ = e^{r d/365} - 1:

    gamma~ > r~ + eps   buy-side arbitrage,  alpha = gamma~ - (r~ + eps)
    gamma~ < r~ - eps   sell-side arbitrage, alpha = gamma~ - (r~ - eps)
    otherwise           no arbitrage,        alpha = 0
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .calibration import CorrMatrix
from .errors import DegenerateVolatilityError, DimensionMismatchError, ValidationError
from .log import get_logger
from .market_data import KeywordSeries, cpc_matrix
from .pricing import DEFAULT_N_PATHS, OptionSpec, deterministic_per_click, price
from .sde_engine import DriftMode, PathSet, SdeModel, sample_correlated_normals, simulate_path, simulate_terminal_gbm
from .stat_tests import std_normal_cdf
from .utils import DAYS_PER_YEAR, as_vector, derive_seed


log = get_logger(__name__)


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ CONSTANT ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
DELTA_METHODS = ("closed_form", "pathwise_mc", "fd_mc")
VERDICTS = ("no_arbitrage", "buy_side_arbitrage", "sell_side_arbitrage", "degenerate")
DEFAULT_EPSILON = 0.05
DEFAULT_D_CONV = 30
DEFAULT_N_DELTA_PATHS = 20_000
# relative bump of C_i(0) in the central-difference delta
DEFAULT_FD_BUMP = 0.01

_DELTA_TOLERANCE = 1e-6
# |Pi(t0)| below this fraction of m * mean(C(0)) makes the growth rate unstable
_DEGENERATE_PI = 1e-6
_MATURITY_TOLERANCE = 1e-9



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Classes ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
@dataclass(frozen=True)
class DeltaVector:
    """Per-keyword hedge ratios dV/dC_i, each in [0, 1]."""

    delta: np.ndarray = field(repr=False)
    method: str
    stderr: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.method not in DELTA_METHODS:
            msg = f"unknown delta method '{self.method}'"
            raise ValidationError(msg)
        delta = as_vector(self.delta, "delta")
        if np.any(delta < -_DELTA_TOLERANCE) or np.any(delta > 1 + _DELTA_TOLERANCE):
            msg = f"delta outside [0, 1]: {delta}"
            raise ValidationError(msg)
        stderr = np.zeros_like(delta) if self.stderr is None else as_vector(self.stderr, "stderr")
        delta.setflags(write=False)
        stderr.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "stderr", stderr)

    @property
    def n(self) -> int:
        """Keyword count."""
        return len(self.delta)


@dataclass(frozen=True)
class HedgeReport:
    """Value-difference process over one backtest window and its verdict."""

    pi_series: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    deltas: np.ndarray = field(repr=False)
    gamma_tilde: float
    r_tilde: float
    epsilon: float
    alpha: float
    verdict: str

    @property
    def days(self) -> int:
        """Window length in days."""
        return len(self.pi_series) - 1


@dataclass(frozen=True)
class TrialSummary:
    """Aggregate of many backtests: how often arbitrage shows up and how large."""

    reports: tuple = field(repr=False)

    def fraction(self, verdict: str) -> float:
        """Share of trials with the given verdict."""
        return float(np.mean([rep.verdict == verdict for rep in self.reports]))

    @property
    def p_no_arbitrage(self) -> float:
        """Share of trials judged fairly priced."""
        return self.fraction("no_arbitrage")

    @property
    def p_arbitrage(self) -> float:
        """Share of trials with buy- or sell-side arbitrage."""
        return self.fraction("buy_side_arbitrage") + self.fraction("sell_side_arbitrage")

    @property
    def mean_alpha(self) -> float:
        """Mean identified arbitrage over the trials where it is nonzero (0 if none)."""
        alphas = [rep.alpha for rep in self.reports if rep.alpha != 0]
        return float(np.mean(alphas)) if alphas else 0.0



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Deltas ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def delta_closed(spec: OptionSpec, c0, sigma) -> DeltaVector:
    """Closed-form delta of a 1-keyword option, N(zeta_1)."""
    if spec.n != 1 or spec.match != "exact":
        msg = "delta_closed needs an exact-match 1-keyword option"
        raise ValidationError(msg)
    c0, sigma = as_vector(c0, "c0"), as_vector(sigma, "sigma")
    if sigma[0] == 0:
        msg = "delta_closed needs sigma > 0; the zero-volatility delta is a step function"
        raise DegenerateVolatilityError(msg)
    T = spec.T
    zeta1 = (np.log(c0[0] / spec.F[0]) + (spec.r + 0.5 * sigma[0] ** 2) * T) / (sigma[0] * np.sqrt(T))
    return DeltaVector(np.array([std_normal_cdf(zeta1)]), "closed_form")


def _weight_matrix(spec: OptionSpec) -> np.ndarray:
    return spec.weights if spec.match == "broad" else np.eye(spec.n)


def _exercise_loadings(spec: OptionSpec, terminal: np.ndarray) -> np.ndarray:
    """Per path, the CPC loadings of the chosen keyword (zero when not exercised).

    Ties go to the lowest index.
    """
    weights = _weight_matrix(spec)
    gains = terminal @ weights.T - spec.F
    chosen = np.argmax(gains, axis=-1)
    exercised = np.take_along_axis(gains, chosen[..., None], axis=-1)[..., 0] > 0
    return weights[chosen] * exercised[..., None]


def delta_mc(
        spec: OptionSpec,
        c0,
        sigma,
        corr: CorrMatrix,
        n_paths: int = DEFAULT_N_DELTA_PATHS,
        seed: int = 1,
        *,
        method: str = "pathwise_mc",
        bump: float = DEFAULT_FD_BUMP,
        antithetic: bool = False,
        ) -> DeltaVector:
    """Monte Carlo deltas from risk-neutral terminal samples.

    pathwise_mc: e^{-rT} E[1{i chosen, payoff > 0} C_i(T)/C_i(0)].
    fd_mc: central difference of the discounted payoff with C_i(0) bumped by
    `bump` * C_i(0), on common random numbers.
    """
    c0, sigma = as_vector(c0, "c0"), as_vector(sigma, "sigma")
    if not len(c0) == len(sigma) == corr.n == spec.n:
        msg = f"c0, sigma and corr must all have {spec.n} keywords"
        raise DimensionMismatchError(msg)
    if method not in ("pathwise_mc", "fd_mc"):
        msg = f"delta_mc method must be 'pathwise_mc' or 'fd_mc', got '{method}'"
        raise ValidationError(msg)

    model = SdeModel.gbm(sigma)
    drift = DriftMode.risk_neutral(spec.r)
    noise = sample_correlated_normals(corr, n_paths, 1, seed, antithetic=antithetic)
    discount = np.exp(-spec.r * spec.T)

    if method == "pathwise_mc":
        terminal = simulate_terminal_gbm(c0, model, corr, spec.T, drift, n_paths, seed, noise=noise)
        samples = discount * _exercise_loadings(spec, terminal) * (terminal / c0)
    else:
        samples = np.empty((n_paths, spec.n))
        for i in range(spec.n):
            h = bump * c0[i]
            up, down = c0.copy(), c0.copy()
            up[i] += h
            down[i] -= h
            hi = spec.payoff(simulate_terminal_gbm(up, model, corr, spec.T, drift, n_paths, seed, noise=noise))
            lo = spec.payoff(simulate_terminal_gbm(down, model, corr, spec.T, drift, n_paths, seed, noise=noise))
            samples[:, i] = discount * (hi - lo) / (2 * h)

    estimate = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / np.sqrt(n_paths)
    # sampling noise can push a deep in-the-money estimate past 1
    return DeltaVector(np.clip(estimate, 0.0, 1.0), method, stderr)



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Valuation ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def _intrinsic_delta(spec: OptionSpec, c) -> np.ndarray:
    return _exercise_loadings(spec, np.asarray(c, dtype=float)[None, :])[0]


def value_and_delta(
        spec: OptionSpec,
        c,
        sigma,
        corr: CorrMatrix,
        tau: float,
        *,
        method: str = "auto",
        n_paths: int = DEFAULT_N_PATHS,
        n_delta_paths: int = DEFAULT_N_DELTA_PATHS,
        seed: int = 1,
        ) -> tuple[float, np.ndarray]:
    """One-click value and deltas with `tau` years left to maturity.

    At maturity the value is the payoff and the delta picks the exercised
    keyword. With zero volatility both follow the deterministic forward.
    """
    c, sigma = as_vector(c, "c"), as_vector(sigma, "sigma")
    if tau <= _MATURITY_TOLERANCE:
        return float(spec.payoff(c)), _intrinsic_delta(spec, c)

    live = spec.with_maturity(tau).with_clicks(1)
    if np.all(sigma == 0):
        return deterministic_per_click(live, c), _intrinsic_delta(live, c * np.exp(spec.r * tau))

    quote = price(live, c, sigma, corr, method, n_paths, seed)
    if live.n == 1 and live.match == "exact":
        delta = delta_closed(live, c, sigma)
    else:
        delta = delta_mc(live, c, sigma, corr, n_delta_paths, seed)
    return quote.per_click, np.asarray(delta.delta)



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Arbitrage ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def benchmark_rate(r: float, d_conv: float = DEFAULT_D_CONV, rate_scale: float = 1.0) -> float:
    """Risk-less growth over the comparison window, e^{r * rate_scale * d_conv/365} - 1."""
    return float(np.expm1(r * rate_scale * d_conv / DAYS_PER_YEAR))


def classify_arbitrage(gamma_tilde: float, r_tilde: float, epsilon: float = DEFAULT_EPSILON) -> tuple[float, str]:
    """Identified arbitrage alpha and verdict for one window growth rate."""
    if gamma_tilde > r_tilde + epsilon:
        return gamma_tilde - (r_tilde + epsilon), "buy_side_arbitrage"
    if gamma_tilde < r_tilde - epsilon:
        return gamma_tilde - (r_tilde - epsilon), "sell_side_arbitrage"
    return 0.0, "no_arbitrage"


def hedged_value_process(values, deltas, cpc, m: int = 1) -> np.ndarray:
    """Pi over the window with each day's hedge held until the next rebalance.

    Pi(t0) = m (V(t0) - sum_i Delta_i(t0) C_i(t0)); after that each day adds
    m [(V(t_k+1) - V(t_k)) - sum_i Delta_i(t_k) (C_i(t_k+1) - C_i(t_k))].
    """
    values, deltas, cpc = np.asarray(values, dtype=float), np.asarray(deltas, dtype=float), np.asarray(cpc, dtype=float)
    start = values[0] - deltas[0] @ cpc[0]
    steps = np.diff(values) - np.sum(deltas[:-1] * np.diff(cpc, axis=0), axis=1)
    return m * (start + np.concatenate(([0.0], np.cumsum(steps))))


def _observed_matrix(observed, path: int) -> np.ndarray:
    if isinstance(observed, PathSet):
        return np.asarray(observed.values[path])
    if isinstance(observed, (list, tuple)) and observed and isinstance(observed[0], KeywordSeries):
        return cpc_matrix(list(observed))
    return np.atleast_2d(np.asarray(observed, dtype=float))


def backtest_hedge(
        spec: OptionSpec,
        observed,
        sigma,
        corr: CorrMatrix,
        *,
        path: int = 0,
        method: str = "auto",
        n_paths: int = DEFAULT_N_PATHS,
        n_delta_paths: int = DEFAULT_N_DELTA_PATHS,
        seed: int = 1,
        epsilon: float = DEFAULT_EPSILON,
        d_conv: float = DEFAULT_D_CONV,
        rate_scale: float = 1.0,
        ) -> HedgeReport:
    """Rebalance daily along an observed CPC path and classify the result.

    `observed` is a [day][keyword] array, a list of aligned KeywordSeries, or a
    PathSet (row `path` is used). Day 0 is the option's start; each day is
    repriced with the remaining maturity, with the same seed every day.
    """
    cpc = _observed_matrix(observed, path)
    if cpc.ndim != 2 or cpc.shape[1] != spec.n:
        msg = f"observed path must be [day][keyword] with {spec.n} keywords, got shape {cpc.shape}"
        raise DimensionMismatchError(msg)
    if not np.all(np.isfinite(cpc)):
        msg = "observed path has missing values"
        raise ValidationError(msg)
    days = cpc.shape[0] - 1
    if days < 1:
        msg = "a backtest needs at least 2 daily observations"
        raise ValidationError(msg)
    if days / DAYS_PER_YEAR > spec.T + _MATURITY_TOLERANCE:
        msg = f"backtest window of {days} days outlives the option (T = {spec.T * DAYS_PER_YEAR:.1f} days)"
        raise ValidationError(msg)

    values = np.empty(days + 1)
    deltas = np.empty((days + 1, spec.n))
    for k in range(days + 1):
        tau = max(spec.T - k / DAYS_PER_YEAR, 0.0)
        values[k], deltas[k] = value_and_delta(
            spec, cpc[k], sigma, corr, tau,
            method=method, n_paths=n_paths, n_delta_paths=n_delta_paths, seed=seed,
        )
    pi_series = hedged_value_process(values, deltas, cpc, spec.m)

    r_tilde = benchmark_rate(spec.r, d_conv, rate_scale)
    if abs(pi_series[0]) < _DEGENERATE_PI * spec.m * float(np.mean(cpc[0])):
        log.warning("Pi(t0) = %.3g is too close to zero; backtest is degenerate", pi_series[0])
        return HedgeReport(pi_series, values, deltas, float("nan"), r_tilde, epsilon, 0.0, "degenerate")

    gamma_tilde = float((pi_series[-1] - pi_series[0]) / pi_series[0])
    alpha, verdict = classify_arbitrage(gamma_tilde, r_tilde, epsilon)
    log.debug("backtest: gamma=%.5f r~=%.5f alpha=%.5f %s", gamma_tilde, r_tilde, alpha, verdict)
    return HedgeReport(pi_series, values, deltas, gamma_tilde, r_tilde, epsilon, alpha, verdict)


def backtest_trials(
        spec: OptionSpec,
        c0,
        model: SdeModel,
        corr: CorrMatrix,
        n_trials: int,
        seed: int,
        *,
        days: int | None = None,
        pricing_sigma=None,
        **backtest_options,
        ) -> TrialSummary:
    """Backtest the hedge on `n_trials` synthetic real-world paths.

    Paths follow `model` under its own drift; pricing uses `pricing_sigma`
    (default the model's sigma). Trial t draws its path from a seed derived
    from (seed, t).
    """
    days = round(spec.T * DAYS_PER_YEAR) if days is None else days
    sigma = model.sigma if pricing_sigma is None else as_vector(pricing_sigma, "pricing_sigma")
    horizon = days / DAYS_PER_YEAR

    reports = []
    for trial in range(n_trials):
        paths = simulate_path(c0, model, corr, horizon, days, DriftMode.real(), 1, derive_seed(seed, trial))
        reports.append(backtest_hedge(spec, paths, sigma, corr, seed=seed, **backtest_options))

    summary = TrialSummary(tuple(reports))
    log.info(
        "%d trials: %.1f%% no arbitrage, mean alpha %.4f",
        n_trials, 100 * summary.p_no_arbitrage, summary.mean_alpha,
    )
    return summary



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Reports ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def backtest_frame(reports) -> pd.DataFrame:
    """`trial,gamma_tilde,r_tilde,epsilon,alpha,verdict` rows."""
    return pd.DataFrame({
        "trial": np.arange(len(reports)),
        "gamma_tilde": [rep.gamma_tilde for rep in reports],
        "r_tilde": [rep.r_tilde for rep in reports],
        "epsilon": [rep.epsilon for rep in reports],
        "alpha": [rep.alpha for rep in reports],
        "verdict": [rep.verdict for rep in reports],
    })


def trace_frame(report: HedgeReport) -> pd.DataFrame:
    """Per-day `day,V,delta_1..delta_n,Pi` trace of one backtest."""
    frame = pd.DataFrame({"day": np.arange(report.days + 1), "V": report.values})
    for i in range(report.deltas.shape[1]):
        frame[f"delta_{i + 1}"] = report.deltas[:, i]
    frame["Pi"] = report.pi_series
    return frame
