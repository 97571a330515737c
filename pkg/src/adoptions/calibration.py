"""Estimate GBM drift/volatility per keyword and the cross-keyword correlation matrix.

Volatility is the sample standard deviation (n-1 denominator) of the daily log
change rates, annualized by sqrt(365). Drift inverts the GBM log-return mean,
mu = mean/dt + sigma^2/2. Pricing always swaps the drift for r, so the drift
only matters for real-world simulation.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import MisalignedSeriesError, SeriesTooShortError, ValidationError, ZeroVarianceError
from .log import get_logger
from .market_data import MIN_RETURNS, KeywordSeries, LogReturnSeries, log_returns
from .utils import DAYS_PER_YEAR


log = get_logger(__name__)


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ CONSTANT ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
_DT = 1.0 / DAYS_PER_YEAR
# smallest eigenvalue still treated as PSD
_PSD_TOLERANCE = 1e-10
_SYMMETRY_TOLERANCE = 1e-12



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Classes ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
@dataclass(frozen=True)
class GbmParams:
    """Per-keyword drift (per year) and volatility (per sqrt-year)."""

    keyword_id: str
    mu: float
    sigma: float
    # set when every return in the window was identical
    zero_variance: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)):
            msg = f"{self.keyword_id}: mu and sigma must be finite"
            raise ValidationError(msg)
        if self.sigma < 0:
            msg = f"{self.keyword_id}: sigma must be >= 0"
            raise ValidationError(msg)


@dataclass(frozen=True)
class CorrMatrix:
    """Symmetric, unit-diagonal correlation matrix of keyword log returns."""

    keyword_ids: tuple
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            msg = f"correlation matrix must be square, got shape {rho.shape}"
            raise ValidationError(msg)
        ids = tuple(self.keyword_ids) if self.keyword_ids else tuple(f"k{i + 1}" for i in range(rho.shape[0]))
        if len(ids) != rho.shape[0]:
            msg = f"{len(ids)} keyword ids for a {rho.shape[0]}x{rho.shape[0]} matrix"
            raise ValidationError(msg)
        if not np.allclose(rho, rho.T, atol=_SYMMETRY_TOLERANCE, rtol=0):
            msg = "correlation matrix must be symmetric"
            raise ValidationError(msg)
        if not np.allclose(np.diag(rho), 1.0, atol=_SYMMETRY_TOLERANCE, rtol=0):
            msg = "correlation matrix must have a unit diagonal"
            raise ValidationError(msg)
        if np.any(np.abs(rho) > 1 + _SYMMETRY_TOLERANCE):
            msg = "correlation entries must lie in [-1, 1]"
            raise ValidationError(msg)

        rho = np.clip((rho + rho.T) / 2, -1.0, 1.0)
        np.fill_diagonal(rho, 1.0)
        rho.setflags(write=False)
        object.__setattr__(self, "keyword_ids", ids)
        object.__setattr__(self, "rho", rho)

    @property
    def n(self) -> int:
        """Keyword count."""
        return self.rho.shape[0]

    @classmethod
    def identity(cls, n: int, keyword_ids=()) -> "CorrMatrix":
        """Uncorrelated keywords."""
        return cls(tuple(keyword_ids), np.eye(n))

    @classmethod
    def from_value(cls, rho, n: int | None = None, keyword_ids=()) -> "CorrMatrix":
        """Build from a full matrix, or from one scalar off-diagonal value."""
        if np.isscalar(rho):
            size = n or 2
            matrix = np.full((size, size), float(rho))
            np.fill_diagonal(matrix, 1.0)
            return cls(tuple(keyword_ids), matrix)
        return cls(tuple(keyword_ids), np.asarray(rho, dtype=float))


@dataclass(frozen=True)
class Calibration:
    """Everything `calibrate` learns from one window."""

    params: tuple
    corr: CorrMatrix
    # last observed CPC per keyword (the natural C(0) for a new contract)
    c_last: np.ndarray = field(repr=False)
    # window-mean CPC per keyword (long-run level for mean-reverting models)
    mean_cpc: np.ndarray = field(repr=False)
    psd_repaired: bool = False

    @property
    def keyword_ids(self) -> tuple:
        """Keyword ids, in column order."""
        return tuple(p.keyword_id for p in self.params)

    @property
    def mu(self) -> np.ndarray:
        """Drift vector."""
        return np.array([p.mu for p in self.params])

    @property
    def sigma(self) -> np.ndarray:
        """Volatility vector."""
        return np.array([p.sigma for p in self.params])



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Estimation ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def estimate_sigma(returns: LogReturnSeries) -> GbmParams:
    """Annualized volatility and Ito-corrected drift from daily log returns."""
    y = np.asarray(returns.returns, dtype=float)
    if len(y) < MIN_RETURNS:
        msg = f"{returns.keyword_id}: need >= {MIN_RETURNS} returns, got {len(y)}"
        raise SeriesTooShortError(msg)

    daily_sd = float(np.std(y, ddof=1))
    zero_variance = daily_sd == 0.0
    if zero_variance:
        log.warning("keyword '%s' has zero return variance; sigma = 0", returns.keyword_id)

    sigma = daily_sd * np.sqrt(DAYS_PER_YEAR)
    mu = float(np.mean(y)) / _DT + sigma**2 / 2
    return GbmParams(returns.keyword_id, mu, sigma, zero_variance)


def _pearson(returns: list[LogReturnSeries]) -> CorrMatrix:
    """Raw Pearson correlation of aligned, non-constant return series."""
    if not returns:
        msg = "no return series given"
        raise ValidationError(msg)
    first = returns[0]
    for item in returns:
        if len(item) < MIN_RETURNS:
            msg = f"{item.keyword_id}: need >= {MIN_RETURNS} returns, got {len(item)}"
            raise SeriesTooShortError(msg)
        if item.dates != first.dates:
            msg = f"returns of '{item.keyword_id}' are not aligned with '{first.keyword_id}'"
            raise MisalignedSeriesError(msg)
        if np.std(item.returns) == 0.0:
            raise ZeroVarianceError(item.keyword_id)

    ids = tuple(item.keyword_id for item in returns)
    if len(returns) == 1:
        return CorrMatrix.identity(1, ids)

    rho = np.corrcoef(np.vstack([item.returns for item in returns]))
    rho = np.clip((rho + rho.T) / 2, -1.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    return CorrMatrix(ids, rho)


def estimate_corr(returns: list[LogReturnSeries]) -> CorrMatrix:
    """Pairwise Pearson correlation of aligned return series, PSD-repaired if needed."""
    repaired, _ = check_psd(_pearson(returns))
    return repaired


def check_psd(corr: CorrMatrix) -> tuple[CorrMatrix, bool]:
    """Return `(corr, False)` if PSD, else the eigenvalue-clipped repair and True.

    Negative eigenvalues are set to 0, the matrix is rebuilt, and the diagonal is
    rescaled back to 1.
    """
    eigvals, eigvecs = np.linalg.eigh(corr.rho)
    if eigvals.min() >= -_PSD_TOLERANCE:
        return corr, False

    clipped = eigvecs @ np.diag(np.clip(eigvals, 0.0, None)) @ eigvecs.T
    scale = np.sqrt(np.clip(np.diag(clipped), 1e-300, None))
    rebuilt = clipped / np.outer(scale, scale)
    rebuilt = (rebuilt + rebuilt.T) / 2
    np.fill_diagonal(rebuilt, 1.0)
    log.warning("correlation matrix was indefinite (min eigenvalue %.3g); clipped to PSD", eigvals.min())
    return CorrMatrix(corr.keyword_ids, np.clip(rebuilt, -1.0, 1.0)), True


def calibrate(series: list[KeywordSeries]) -> Calibration:
    """Run the full estimation for aligned keyword series."""
    returns = [log_returns(item) for item in series]
    params = tuple(estimate_sigma(item) for item in returns)

    if len(series) == 1:
        # a lone keyword needs no correlation, even with zero variance
        corr, repaired = CorrMatrix.identity(1, (series[0].keyword_id,)), False
    else:
        corr, repaired = check_psd(_pearson(returns))

    return Calibration(
        params=params,
        corr=corr,
        c_last=np.array([item.cpc[-1] for item in series]),
        mean_cpc=np.array([float(np.mean(item.cpc)) for item in series]),
        psd_repaired=repaired,
    )



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Reports ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def params_frame(params) -> pd.DataFrame:
    """`keyword,mu,sigma` report rows."""
    return pd.DataFrame(
        {"keyword": [p.keyword_id for p in params], "mu": [p.mu for p in params], "sigma": [p.sigma for p in params]}
    )


def corr_frame(corr: CorrMatrix) -> pd.DataFrame:
    """Square correlation table with keyword ids on both axes."""
    frame = pd.DataFrame(np.asarray(corr.rho), index=list(corr.keyword_ids), columns=list(corr.keyword_ids))
    frame.index.name = "keyword"
    return frame
