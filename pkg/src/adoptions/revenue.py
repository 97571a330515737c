"""Seller's expected revenue difference D(F) between the option and the auction.

For one keyword with forward level E = C(0) e^{(r - sigma^2/2) T}:

    D(F) = C(0) N(zeta_1) - e^{-rT} F N(zeta_2) - e^{-rT} (E - F) N(zeta_2)
         = C(0) N(zeta_1) - e^{-rT} E N(zeta_2)

which is positive for every F > 0 and peaks at F = E. The n-keyword version is
estimated by Monte Carlo: a click the buyer exercises on keyword j earns the
seller F_j through the option instead of the expected auction price E_j.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .calibration import CorrMatrix
from .errors import DimensionMismatchError, GridTooLargeError, ValidationError
from .log import get_logger
from .pricing import DEFAULT_N_PATHS, OptionSpec, forward_expectation, price
from .sde_engine import DriftMode, SdeModel, simulate_terminal_gbm
from .stat_tests import std_normal_cdf
from .utils import as_vector


log = get_logger(__name__)


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ CONSTANT ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
MAX_GRID_POINTS = 10_000



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Classes ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
@dataclass(frozen=True)
class RevenueCurve:
    """D evaluated over a grid of fixed-CPC vectors.

    `grid[p]` is the F vector of point p. The reference point is F_i equal to
    the forward level of each keyword (or candidate).
    """

    grid: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    reference_F: np.ndarray = field(repr=False)
    reference_D: float
    reference_stderr: float
    # points lying on the edge of the grid in some coordinate
    boundary: np.ndarray = field(repr=False)

    @property
    def optimum(self) -> int:
        """Index of the grid point with the largest D."""
        return int(np.argmax(self.D))

    @property
    def optimum_F(self) -> np.ndarray:
        """F vector of the maximizing grid point."""
        return self.grid[self.optimum]



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Closed form ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def revenue_zetas(c0: float, sigma: float, r: float, T: float, F) -> tuple:
    """zeta_1 with (r + sigma^2/2) T and zeta_2 with (r - sigma^2/2) T."""
    sd = sigma * np.sqrt(T)
    log_moneyness = np.log(c0 / np.asarray(F, dtype=float))
    zeta1 = (log_moneyness + (r + 0.5 * sigma**2) * T) / sd
    zeta2 = (log_moneyness + (r - 0.5 * sigma**2) * T) / sd
    return zeta1, zeta2


def revenue_diff_1d(c0: float, sigma: float, r: float, T: float, F):
    """Closed-form D(F) of a 1-keyword option (vectorized over F).

    Zero volatility returns the deterministic limit, which is 0.
    """
    F_arr = np.asarray(F, dtype=float)
    if np.any(F_arr <= 0):
        msg = "revenue_diff_1d needs F > 0"
        raise ValidationError(msg)
    if c0 <= 0 or sigma < 0 or T <= 0:
        msg = "revenue_diff_1d needs c0 > 0, sigma >= 0 and T > 0"
        raise ValidationError(msg)
    if sigma == 0:
        log.warning("revenue_diff_1d with sigma = 0; returning the deterministic limit D = 0")
        out = np.zeros_like(F_arr)
        return float(out) if out.ndim == 0 else out

    zeta1, zeta2 = revenue_zetas(c0, sigma, r, T, F_arr)
    forward = float(forward_expectation(c0, sigma, r, T)[0])
    out = c0 * std_normal_cdf(zeta1) - np.exp(-r * T) * forward * std_normal_cdf(zeta2)
    return float(out) if np.ndim(out) == 0 else out



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Monte Carlo ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def _loadings(spec: OptionSpec) -> np.ndarray:
    return spec.weights if spec.match == "broad" else np.eye(spec.n)


def _terminal_samples(spec: OptionSpec, c0, sigma, corr: CorrMatrix, n_paths: int, seed: int, antithetic: bool):
    return simulate_terminal_gbm(
        c0, SdeModel.gbm(sigma), corr, spec.T, DriftMode.risk_neutral(spec.r), n_paths, seed, antithetic=antithetic,
    )


def _revenue_samples(spec: OptionSpec, terminal: np.ndarray, forward: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Per-path discounted revenue difference for one F vector.

    The buyer exercises the candidate with the largest positive gain (ties to
    the lowest index); unexercised clicks go to auction either way and add 0.
    """
    weights = _loadings(spec)
    gains = terminal @ weights.T - F
    chosen = np.argmax(gains, axis=1)
    best = gains[np.arange(len(gains)), chosen]
    exercised = best > 0
    expected_auction = (weights @ forward)[chosen]
    d = np.maximum(best, 0.0) - (expected_auction - F[chosen]) * exercised
    return np.exp(-spec.r * spec.T) * d


def revenue_diff_mc(
        spec: OptionSpec,
        c0,
        sigma,
        corr: CorrMatrix,
        F=None,
        n_paths: int = DEFAULT_N_PATHS,
        seed: int = 1,
        *,
        antithetic: bool = False,
        ) -> tuple[float, float]:
    """Monte Carlo D and its standard error at fixed CPCs `F` (default `spec.F`)."""
    c0, sigma = as_vector(c0, "c0"), as_vector(sigma, "sigma")
    F = spec.F if F is None else as_vector(F, "F")
    if len(F) != len(spec.F):
        msg = f"{len(F)} fixed CPCs for {len(spec.F)} candidates"
        raise DimensionMismatchError(msg)
    terminal = _terminal_samples(spec, c0, sigma, corr, n_paths, seed, antithetic)
    samples = _revenue_samples(spec, terminal, forward_expectation(c0, sigma, spec.r, spec.T), F)
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n_paths))



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Grids ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def make_axes(reference, low: float, high: float, points: int) -> list[np.ndarray]:
    """One F axis per candidate, from `low` to `high` times its reference level."""
    if not 0 < low <= high or points < 1:
        msg = f"grid needs 0 < low <= high and points >= 1, got {low}, {high}, {points}"
        raise ValidationError(msg)
    return [np.linspace(low * level, high * level, points) for level in as_vector(reference, "reference")]


def _grid_points(axes: list) -> np.ndarray:
    total = int(np.prod([len(axis) for axis in axes]))
    if total > MAX_GRID_POINTS:
        msg = f"grid has {total} points, more than {MAX_GRID_POINTS}"
        raise GridTooLargeError(msg)
    return np.array(list(itertools.product(*axes)), dtype=float)


def revenue_surface(
        spec: OptionSpec,
        c0,
        sigma,
        corr: CorrMatrix,
        axes: list,
        n_paths: int = DEFAULT_N_PATHS,
        seed: int = 1,
        *,
        method: str = "auto",
        antithetic: bool = False,
        ) -> RevenueCurve:
    """Evaluate D on the product grid of `axes` (one axis per candidate).

    An exact 1-keyword option uses the closed form unless `method` is 'mc'.
    Monte Carlo points share one set of terminal samples.
    """
    c0, sigma = as_vector(c0, "c0"), as_vector(sigma, "sigma")
    if len(axes) != len(spec.F):
        msg = f"{len(axes)} grid axes for {len(spec.F)} candidates"
        raise DimensionMismatchError(msg)
    grid = _grid_points(axes)
    if np.any(grid <= 0):
        msg = "grid bounds must be positive"
        raise ValidationError(msg)

    forward = forward_expectation(c0, sigma, spec.r, spec.T)
    reference = _loadings(spec) @ forward
    closed = method != "mc" and spec.n == 1 and spec.match == "exact" and sigma[0] > 0

    if closed:
        def _evaluate(F):
            return float(revenue_diff_1d(c0[0], sigma[0], spec.r, spec.T, F[0])), 0.0
    else:
        terminal = _terminal_samples(spec, c0, sigma, corr, n_paths, seed, antithetic)

        def _evaluate(F):
            samples = _revenue_samples(spec, terminal, forward, F)
            return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n_paths))

    values = np.array([_evaluate(F) for F in grid])
    ref_D, ref_se = _evaluate(reference)

    lows = np.array([axis[0] for axis in axes])
    highs = np.array([axis[-1] for axis in axes])
    boundary = np.any((grid == lows) | (grid == highs), axis=1)

    negative = values[:, 0] < -3 * values[:, 1]
    if np.any(negative):
        log.warning("%d grid points have D below -3 stderr", int(negative.sum()))

    curve = RevenueCurve(grid, values[:, 0], values[:, 1], reference, ref_D, ref_se, boundary)
    log.info("revenue surface: %d points, max D = %.6f at F = %s", len(grid), curve.D.max(), curve.optimum_F)
    return curve


def option_price_curve(spec: OptionSpec, c0, sigma, corr: CorrMatrix, F_values, **pricing_options) -> pd.DataFrame:
    """Option price pi for each F vector in `F_values`, on a shared seed."""
    rows = []
    for F in F_values:
        F = as_vector(F, "F")
        quote = price(OptionSpec(spec.keywords, F, spec.m, spec.T, spec.r, spec.match, spec.weights),
                      c0, sigma, corr, **pricing_options)
        rows.append([*F, quote.pi, quote.mc_std_error, quote.method])
    columns = [f"F_{i + 1}" for i in range(len(spec.F))] + ["pi", "stderr", "method"]
    return pd.DataFrame(rows, columns=columns)



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Reports ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def surface_frame(curve: RevenueCurve) -> pd.DataFrame:
    """`F_1,...,F_n,D,stderr` rows."""
    frame = pd.DataFrame(curve.grid, columns=[f"F_{i + 1}" for i in range(curve.grid.shape[1])])
    frame["D"] = curve.D
    frame["stderr"] = curve.stderr
    return frame


def summary_frame(curve: RevenueCurve) -> pd.DataFrame:
    """Two rows: the grid argmax and the forward-level reference point."""
    n = curve.grid.shape[1]
    rows = [
        ["argmax", *curve.optimum_F, curve.D[curve.optimum], curve.stderr[curve.optimum], bool(curve.boundary[curve.optimum])],
        ["reference", *curve.reference_F, curve.reference_D, curve.reference_stderr, False],
    ]
    return pd.DataFrame(rows, columns=["point", *[f"F_{i + 1}" for i in range(n)], "D", "stderr", "boundary"])
