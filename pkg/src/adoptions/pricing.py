"""Price the n-keyword m-click ad option.

The option gives the advertiser m clicks, each bought at the fixed CPC F_i of
whichever keyword i they choose, or left unexercised. One click is worth
max(C_1 - F_1, ..., C_n - F_n, 0) at maturity, and the m-click price is m times
the discounted risk-neutral expectation of that payoff. Exercising before
maturity never pays (the discounted payoff is a sub-martingale), so the pricers
only need terminal CPCs.

Methods:
    mc                  exact terminal GBM sampling, any n, exact or broad match
    bsm_closed          n = 1, Black-Scholes-Merton
    dual_strike_closed  n = 2, one-dimensional integrals (|rho| < 1)
    quadrature          nested adaptive quadrature, n <= 3, oracle only
"""

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import integrate

from .calibration import CorrMatrix
from .errors import DegenerateVolatilityError, DimensionMismatchError, MissingSubKeywordError, ValidationError
from .log import get_logger
from .sde_engine import DriftMode, SdeModel, correlation_factor, simulate_terminal_gbm
from .stat_tests import std_normal_cdf, std_normal_pdf
from .utils import as_vector


log = get_logger(__name__)


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ CONSTANT ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
PRICING_METHODS = ("mc", "bsm_closed", "dual_strike_closed", "quadrature")
MATCH_TYPES = ("exact", "broad")
MIN_MC_PATHS = 1000
DEFAULT_N_PATHS = 100_000

# standard normal tail beyond 8 is below 1e-15
_TRUNCATION = 8.0
_DUAL_EPSABS = 1e-11
_DUAL_EPSREL = 1e-10
_QUAD_EPSABS = 1e-10
_QUAD_EPSREL = 1e-9
_QUAD_LIMIT = 200
_QUAD_MAX_N = 3



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Classes ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
@dataclass(frozen=True)
class OptionSpec:
    """Contract terms of one n-keyword m-click option.

    Under exact match `keywords` and `F` are aligned. Under broad match
    `keywords` lists the simulated sub-keywords, `F` holds one fixed CPC per
    candidate keyword, and `weights[j][i]` is the probability that a click on
    candidate j lands on sub-keyword i.
    """

    keywords: tuple
    F: np.ndarray = field(repr=False)
    m: int = 1
    T: float = 31 / 365
    r: float = 0.05
    match: str = "exact"
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        keywords = tuple(str(k) for k in self.keywords)
        if not keywords:
            msg = "an option needs at least one keyword"
            raise ValidationError(msg)
        F = as_vector(self.F, "F")
        if np.any(F < 0) or not np.all(np.isfinite(F)):
            msg = "fixed CPCs F must be finite and >= 0"
            raise ValidationError(msg)
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            msg = f"m must be an integer >= 1, got {self.m!r}"
            raise ValidationError(msg)
        if not self.T > 0:
            msg = f"T must be > 0, got {self.T}"
            raise ValidationError(msg)
        if self.match not in MATCH_TYPES:
            msg = f"match must be one of {MATCH_TYPES}, got '{self.match}'"
            raise ValidationError(msg)

        weights = None
        if self.match == "exact":
            if len(F) != len(keywords):
                msg = f"{len(F)} fixed CPCs for {len(keywords)} keywords"
                raise DimensionMismatchError(msg)
        else:
            if self.weights is None:
                msg = "broad match needs weights"
                raise ValidationError(msg)
            weights = np.atleast_2d(np.asarray(self.weights, dtype=float)).copy()
            if weights.shape != (len(F), len(keywords)):
                msg = f"weights have shape {weights.shape}, expected {(len(F), len(keywords))}"
                raise DimensionMismatchError(msg)
            if np.any(weights < 0):
                msg = "broad-match weights must be >= 0"
                raise ValidationError(msg)
            weights.setflags(write=False)

        F.setflags(write=False)
        object.__setattr__(self, "keywords", keywords)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        """Number of simulated keywords (sub-keywords under broad match)."""
        return len(self.keywords)

    def payoff(self, c) -> np.ndarray:
        """One-click payoff for terminal CPCs `c` of shape [..., n]."""
        if self.match == "broad":
            return payoff_broad(c, self.weights, self.F)
        return payoff_exact(c, self.F)

    def with_maturity(self, T: float) -> "OptionSpec":
        """Same contract with a different remaining maturity."""
        return replace(self, T=T)

    def with_clicks(self, m: int) -> "OptionSpec":
        """Same contract for a different number of clicks."""
        return replace(self, m=m)


@dataclass(frozen=True)
class PriceQuote:
    """An m-click price; `pi` is always exactly m times `per_click`."""

    per_click: float
    m: int
    method: str
    mc_std_error: float = 0.0
    n_paths: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.method not in PRICING_METHODS:
            msg = f"unknown pricing method '{self.method}'"
            raise ValidationError(msg)
        # clip round-off below zero
        object.__setattr__(self, "per_click", max(float(self.per_click), 0.0))

    @property
    def pi(self) -> float:
        """Price of all m clicks."""
        return self.m * self.per_click


@dataclass(frozen=True)
class EarlyExerciseReport:
    """Immediate exercise value against the discounted continuation value."""

    t: float
    immediate: float
    continuation: float
    stderr: float

    @property
    def holds(self) -> bool:
        """True when waiting is worth at least exercising now (within 3 stderr)."""
        return self.immediate <= self.continuation + 3 * self.stderr



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Payoffs ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def payoff_exact(c, F):
    """max(C_1 - F_1, ..., C_n - F_n, 0); `c` may carry leading sample axes."""
    c = np.asarray(c, dtype=float)
    F = as_vector(F, "F")
    if c.shape[-1:] != F.shape:
        msg = f"CPC vector has {c.shape[-1:]} entries, F has {len(F)}"
        raise DimensionMismatchError(msg)
    out = np.maximum(np.max(c - F, axis=-1), 0.0)
    return float(out) if out.ndim == 0 else out


def payoff_broad(c, weights, F):
    """max over candidates j of (sum_i w_ji C_ji - F_j), floored at 0."""
    c = np.asarray(c, dtype=float)
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    F = as_vector(F, "F")
    if weights.shape[0] != len(F):
        msg = f"{weights.shape[0]} weight rows for {len(F)} candidates"
        raise DimensionMismatchError(msg)
    if c.shape[-1] != weights.shape[1]:
        msg = f"weights reference {weights.shape[1]} sub-keywords, CPC vector has {c.shape[-1]}"
        raise MissingSubKeywordError(msg)
    out = np.maximum(np.max(c @ weights.T - F, axis=-1), 0.0)
    return float(out) if out.ndim == 0 else out


def broad_weights(candidates, sub_keywords) -> np.ndarray:
    """Weight matrix from per-candidate `{sub_keyword: weight}` mappings."""
    index = {kw: i for i, kw in enumerate(sub_keywords)}
    weights = np.zeros((len(candidates), len(index)))
    for j, candidate in enumerate(candidates):
        for kw, weight in candidate.items():
            if kw not in index:
                msg = f"candidate {j + 1} references sub-keyword '{kw}' with no CPC series"
                raise MissingSubKeywordError(msg)
            weights[j, index[kw]] = float(weight)
    return weights


def forward_expectation(c0, sigma, r: float, T: float) -> np.ndarray:
    """Risk-neutral log-mean point C_i(0) exp((r - sigma_i^2/2) T)."""
    c0 = as_vector(c0, "c0")
    sigma = as_vector(sigma, "sigma")
    return c0 * np.exp((r - 0.5 * sigma**2) * T)



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Helpers ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def _check_market(spec: OptionSpec, c0, sigma, corr: CorrMatrix | None = None):
    c0 = as_vector(c0, "c0")
    sigma = as_vector(sigma, "sigma")
    if not len(c0) == len(sigma) == spec.n:
        msg = f"c0 ({len(c0)}) and sigma ({len(sigma)}) must match the {spec.n} keywords"
        raise DimensionMismatchError(msg)
    if corr is not None and corr.n != spec.n:
        msg = f"correlation matrix is {corr.n}x{corr.n} for {spec.n} keywords"
        raise DimensionMismatchError(msg)
    if np.any(c0 <= 0) or np.any(sigma < 0):
        msg = "c0 must be > 0 and sigma >= 0"
        raise ValidationError(msg)
    return c0, sigma


def deterministic_per_click(spec: OptionSpec, c0) -> float:
    """Zero-volatility value: the discounted payoff at the forward CPCs."""
    c0 = as_vector(c0, "c0")
    return float(np.exp(-spec.r * spec.T) * spec.payoff(c0 * np.exp(spec.r * spec.T)))



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Monte Carlo ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def price_mc(
        spec: OptionSpec,
        c0,
        sigma,
        corr: CorrMatrix,
        n_paths: int = DEFAULT_N_PATHS,
        seed: int = 1,
        *,
        antithetic: bool = False,
        workers: int = 1,
        noise: np.ndarray | None = None,
        ) -> PriceQuote:
    """Monte Carlo price from risk-neutral terminal samples only.

    The standard error is m e^{-rT} sd(payoff)/sqrt(n_paths); with antithetic
    pairs it is computed from pair means. A zero-volatility market is priced by
    its deterministic limit exactly.
    """
    c0, sigma = _check_market(spec, c0, sigma, corr)
    if n_paths < MIN_MC_PATHS:
        msg = f"price_mc needs n_paths >= {MIN_MC_PATHS}, got {n_paths}"
        raise ValidationError(msg)
    if antithetic and n_paths % 2:
        msg = "antithetic sampling needs an even n_paths"
        raise ValidationError(msg)

    if np.all(sigma == 0):
        return PriceQuote(deterministic_per_click(spec, c0), spec.m, "mc", 0.0, n_paths, seed)

    terminal = simulate_terminal_gbm(
        c0, SdeModel.gbm(sigma), corr, spec.T, DriftMode.risk_neutral(spec.r), n_paths, seed,
        noise=noise, antithetic=antithetic and noise is None, workers=workers,
    )
    discount = np.exp(-spec.r * spec.T)
    payoffs = spec.payoff(terminal)

    if antithetic and noise is None:
        half = n_paths // 2
        samples = 0.5 * (payoffs[:half] + payoffs[half:])
    else:
        samples = payoffs
    stderr = discount * float(np.std(samples, ddof=1)) / np.sqrt(len(samples))

    per_click = discount * float(np.mean(payoffs))
    log.debug("price_mc: n=%d paths=%d per_click=%.6f stderr=%.2g", spec.n, n_paths, per_click, stderr)
    return PriceQuote(per_click, spec.m, "mc", spec.m * stderr, n_paths, seed)



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Closed forms ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def _require_exact(spec: OptionSpec, method: str):
    if spec.match != "exact":
        msg = f"{method} supports exact match only; use mc for broad match"
        raise ValidationError(msg)


def bsm_per_click(c0: float, F: float, sigma: float, r: float, T: float) -> float:
    """Black-Scholes-Merton call value of one click."""
    sd = sigma * np.sqrt(T)
    zeta1 = (np.log(c0 / F) + (r + 0.5 * sigma**2) * T) / sd
    zeta2 = zeta1 - sd
    return float(c0 * std_normal_cdf(zeta1) - F * np.exp(-r * T) * std_normal_cdf(zeta2))


def price_bsm_closed(spec: OptionSpec, c0, sigma) -> PriceQuote:
    """Closed-form price of a 1-keyword option."""
    _require_exact(spec, "bsm_closed")
    if spec.n != 1:
        msg = f"bsm_closed prices 1-keyword options, got n = {spec.n}"
        raise ValidationError(msg)
    c0, sigma = _check_market(spec, c0, sigma)
    if sigma[0] == 0:
        msg = "bsm_closed needs sigma > 0; use the deterministic limit"
        raise DegenerateVolatilityError(msg)
    if spec.F[0] <= 0:
        msg = "bsm_closed needs F > 0"
        raise ValidationError(msg)
    per_click = bsm_per_click(c0[0], spec.F[0], sigma[0], spec.r, spec.T)
    return PriceQuote(per_click, spec.m, "bsm_closed")


def _dual_term(c_i, F_i, s_i, c_j, F_j, s_j, rho, r, T) -> float:
    """Discounted value of exercising keyword i (payoff above zero and above keyword j).

    Conditioning on the standard normal z driving keyword i leaves keyword j
    log-normal, so the exercise probability is one normal CDF inside a
    one-dimensional integral over z.
    """
    sd_i, sd_j = s_i * np.sqrt(T), s_j * np.sqrt(T)
    drift_i, drift_j = (r - 0.5 * s_i**2) * T, (r - 0.5 * s_j**2) * T
    resid = np.sqrt(1.0 - rho**2)

    lower = (np.log(F_i / c_i) - drift_i) / sd_i
    upper = max(lower, sd_i + _TRUNCATION)
    if lower >= upper:
        return 0.0
    lower = max(lower, -_TRUNCATION)

    def _prob_beats_j(z):
        c_iT = c_i * np.exp(drift_i + sd_i * z)
        q = (np.log((c_iT - F_i + F_j) / c_j) - drift_j) / sd_j
        return std_normal_cdf((q - rho * z) / resid)

    # e^{-rT} C_i(T) phi(z) = C_i(0) phi(z - sd_i)
    def _cpc_part(z):
        return c_i * std_normal_pdf(z - sd_i) * _prob_beats_j(z)

    def _strike_part(z):
        return std_normal_pdf(z) * _prob_beats_j(z)

    opts = {"epsabs": _DUAL_EPSABS, "epsrel": _DUAL_EPSREL, "limit": _QUAD_LIMIT}
    cpc, _ = integrate.quad(_cpc_part, lower, upper, **opts)
    strike, _ = integrate.quad(_strike_part, lower, upper, **opts)
    return cpc - np.exp(-r * T) * F_i * strike


def price_dual_strike_closed(spec: OptionSpec, c0, sigma, rho: float) -> PriceQuote:
    """Semi-closed price of a 2-keyword option via four one-dimensional integrals."""
    _require_exact(spec, "dual_strike_closed")
    if spec.n != 2:
        msg = f"dual_strike_closed prices 2-keyword options, got n = {spec.n}"
        raise ValidationError(msg)
    c0, sigma = _check_market(spec, c0, sigma)
    rho = float(rho.rho[0, 1]) if isinstance(rho, CorrMatrix) else float(rho)
    if np.any(sigma == 0):
        msg = "dual_strike_closed needs sigma_1, sigma_2 > 0"
        raise DegenerateVolatilityError(msg)
    if abs(rho) >= 1:
        msg = f"dual_strike_closed needs |rho| < 1, got {rho}; use mc"
        raise DegenerateVolatilityError(msg)
    if np.any(spec.F <= 0):
        msg = "dual_strike_closed needs F > 0"
        raise ValidationError(msg)

    (c1, c2), (F1, F2), (s1, s2) = c0, spec.F, sigma
    per_click = (
        _dual_term(c1, F1, s1, c2, F2, s2, rho, spec.r, spec.T)
        + _dual_term(c2, F2, s2, c1, F1, s1, rho, spec.r, spec.T)
    )
    return PriceQuote(per_click, spec.m, "dual_strike_closed")



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Quadrature ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def price_quadrature(spec: OptionSpec, c0, sigma, corr: CorrMatrix) -> PriceQuote:
    """Reference price by nested adaptive quadrature over independent normals.

    The correlated log-CPC shocks are z = L w with w standard normal, so keyword
    j depends on w_1..w_j only. Each level integrates over [-8, 8] with a break
    point where keyword j's payoff overtakes the best of the earlier ones.
    Practical for n <= 2; n = 3 is slow.
    """
    _require_exact(spec, "quadrature")
    c0, sigma = _check_market(spec, c0, sigma, corr)
    if spec.n > _QUAD_MAX_N:
        msg = f"quadrature supports n <= {_QUAD_MAX_N}, got n = {spec.n}"
        raise ValidationError(msg)
    if np.any(sigma == 0):
        msg = "quadrature needs sigma > 0 (the density collapses at sigma = 0)"
        raise DegenerateVolatilityError(msg)

    lower = correlation_factor(corr)
    n, F = spec.n, spec.F
    sd = sigma * np.sqrt(spec.T)
    drift = (spec.r - 0.5 * sigma**2) * spec.T
    opts = {"epsabs": _QUAD_EPSABS, "epsrel": _QUAD_EPSREL, "limit": _QUAD_LIMIT}

    def _cpc(j, w):
        return c0[j] * np.exp(drift[j] + sd[j] * np.dot(lower[j, : j + 1], w[: j + 1]))

    def _level(j, prefix):
        best = max([0.0] + [_cpc(i, prefix) - F[i] for i in range(j)])

        def _integrand(wj):
            w = np.append(prefix, wj)
            value = max(best, _cpc(j, w) - F[j]) if j == n - 1 else _level(j + 1, w)
            return value * std_normal_pdf(wj)

        points = None
        if lower[j, j] > 0 and F[j] + best > 0:
            shift = np.dot(lower[j, :j], prefix)
            kink = ((np.log((F[j] + best) / c0[j]) - drift[j]) / sd[j] - shift) / lower[j, j]
            if -_TRUNCATION < kink < _TRUNCATION:
                points = [kink]
        value, _ = integrate.quad(_integrand, -_TRUNCATION, _TRUNCATION, points=points, **opts)
        return value

    per_click = np.exp(-spec.r * spec.T) * _level(0, np.empty(0))
    return PriceQuote(per_click, spec.m, "quadrature")



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Dispatch ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def choose_method(spec: OptionSpec, sigma, corr: CorrMatrix | None = None) -> str:
    """Pick the cheapest exact method that applies, else Monte Carlo."""
    sigma = as_vector(sigma, "sigma")
    if spec.match != "exact" or np.any(sigma == 0) or np.any(spec.F <= 0):
        return "mc"
    if spec.n == 1:
        return "bsm_closed"
    if spec.n == 2 and corr is not None and abs(corr.rho[0, 1]) < 1:
        return "dual_strike_closed"
    return "mc"


def price(
        spec: OptionSpec,
        c0,
        sigma,
        corr: CorrMatrix | None = None,
        method: str = "auto",
        n_paths: int = DEFAULT_N_PATHS,
        seed: int = 1,
        *,
        antithetic: bool = False,
        workers: int = 1,
        ) -> PriceQuote:
    """Price with `method`, or the best available one when method is 'auto'."""
    if corr is None:
        corr = CorrMatrix.identity(spec.n, spec.keywords)
    if method == "auto":
        method = choose_method(spec, sigma, corr)
    log.debug("pricing %d-keyword option with %s", spec.n, method)

    if method == "mc":
        return price_mc(spec, c0, sigma, corr, n_paths, seed, antithetic=antithetic, workers=workers)
    if method == "bsm_closed":
        return price_bsm_closed(spec, c0, sigma)
    if method == "dual_strike_closed":
        return price_dual_strike_closed(spec, c0, sigma, corr)
    if method == "quadrature":
        return price_quadrature(spec, c0, sigma, corr)
    msg = f"unknown pricing method '{method}'"
    raise ValidationError(msg)


def check_no_early_exercise(
        spec: OptionSpec,
        c_t,
        t: float,
        sigma,
        corr: CorrMatrix,
        n_paths: int = DEFAULT_N_PATHS,
        seed: int = 1,
        ) -> EarlyExerciseReport:
    """Compare exercising one click at time t with holding it to maturity."""
    if not 0 <= t < spec.T:
        msg = f"t must satisfy 0 <= t < T, got t = {t}, T = {spec.T}"
        raise ValidationError(msg)
    c_t = as_vector(c_t, "c_t")
    immediate = float(spec.payoff(c_t))
    remaining = spec.with_maturity(spec.T - t).with_clicks(1)
    quote = price_mc(remaining, c_t, sigma, corr, n_paths, seed)

    report = EarlyExerciseReport(t, immediate, quote.per_click, quote.mc_std_error)
    if not report.holds:
        log.warning(
            "early exercise beat continuation at t=%.4f: %.6f > %.6f (+/- %.2g)",
            t, immediate, quote.per_click, quote.mc_std_error,
        )
    return report



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Reports ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def quote_frame(quotes) -> pd.DataFrame:
    """`method,pi,per_click,stderr,n_paths,seed` rows."""
    return pd.DataFrame({
        "method": [q.method for q in quotes],
        "pi": [q.pi for q in quotes],
        "per_click": [q.per_click for q in quotes],
        "stderr": [q.mc_std_error for q in quotes],
        "n_paths": [q.n_paths for q in quotes],
        "seed": [q.seed for q in quotes],
    })
