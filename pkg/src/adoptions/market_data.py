"""Load, validate and window daily CPC time series.

CSV schema (UTF-8, header required)::

    keyword,date,cpc
    canon cameras,2012-01-25,3.50

One row per keyword-day, ISO dates, `.` decimal separator. Keywords that cannot
be used for the requested window are dropped and reported as rejections
(`keyword,reason`) rather than failing the whole load.
"""

import datetime
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import MalformedRowError, SeriesTooShortError, ValidationError
from .log import get_logger


log = get_logger(__name__)


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ CONSTANT ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
CSV_COLUMNS = ("keyword", "date", "cpc")
WINDOW_ROLES = ("training", "development", "test")
# smallest sample the statistical tests accept
MIN_RETURNS = 8
# one more day than returns
MIN_WINDOW_OBSERVATIONS = MIN_RETURNS + 1

REASON_ZERO_CPC = "zero CPC"
REASON_NON_POSITIVE = "non-positive CPC"
REASON_GAP = "gap"
REASON_DUPLICATE = "duplicate date"



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Classes ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class KeywordSeries:
    """Dated, strictly positive daily CPC observations for one keyword."""

    keyword_id: str
    dates: tuple
    cpc: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "cpc", _frozen_array(self.cpc))
        if len(self.dates) != len(self.cpc):
            msg = f"{self.keyword_id}: {len(self.dates)} dates but {len(self.cpc)} CPCs"
            raise ValidationError(msg)
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            msg = f"{self.keyword_id}: dates must be strictly increasing"
            raise ValidationError(msg)
        if np.any(~np.isfinite(self.cpc)) or np.any(self.cpc <= 0):
            msg = f"{self.keyword_id}: every CPC must be > 0"
            raise ValidationError(msg)

    def __len__(self):
        return len(self.cpc)


@dataclass(frozen=True)
class LogReturnSeries:
    """Daily log change rates y(k) = ln C(t_k) - ln C(t_{k-1})."""

    keyword_id: str
    dates: tuple
    returns: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "returns", _frozen_array(self.returns))

    def __len__(self):
        return len(self.returns)


@dataclass(frozen=True)
class DataWindow:
    """Inclusive calendar window [start, end] playing a role in an experiment."""

    role: str
    start: datetime.date
    end: datetime.date

    def __post_init__(self):
        if self.role not in WINDOW_ROLES:
            msg = f"window role must be one of {WINDOW_ROLES}, got '{self.role}'"
            raise ValidationError(msg)
        if not self.start < self.end:
            msg = f"window start {self.start} must be before end {self.end}"
            raise ValidationError(msg)
        if self.n_days < MIN_WINDOW_OBSERVATIONS:
            msg = f"window {self.start}..{self.end} holds {self.n_days} days, need >= {MIN_WINDOW_OBSERVATIONS}"
            raise ValidationError(msg)

    @property
    def n_days(self) -> int:
        """Number of calendar days in the window, both ends included."""
        return (self.end - self.start).days + 1

    def days(self) -> list:
        """Every calendar day in the window."""
        return [self.start + datetime.timedelta(days=i) for i in range(self.n_days)]


@dataclass(frozen=True)
class Rejection:
    """A keyword dropped at load time, with the reason."""

    keyword: str
    reason: str



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Loading ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def read_cpc_csv(path: str) -> pd.DataFrame:
    """Read and type-check the raw CSV. Raises MalformedRowError on any bad row."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as err:
        msg = f"{path}: could not parse CSV ({err})"
        raise MalformedRowError(msg) from err

    if tuple(frame.columns) != CSV_COLUMNS:
        msg = f"{path}: header must be '{','.join(CSV_COLUMNS)}', got '{','.join(frame.columns)}'"
        raise MalformedRowError(msg)

    dates = pd.to_datetime(frame["date"], format="%Y-%m-%d", errors="coerce")
    cpc = pd.to_numeric(frame["cpc"], errors="coerce")
    bad = dates.isna() | cpc.isna() | (frame["keyword"].str.strip() == "")
    if bad.any():
        # +2: header line plus 1-based numbering
        row = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        msg = f"{path}: malformed row {row}: {','.join(frame.iloc[row - 2])}"
        raise MalformedRowError(msg)

    return pd.DataFrame({"keyword": frame["keyword"], "date": dates.dt.date, "cpc": cpc.astype(float)})


def load_series(path: str, window: DataWindow) -> tuple[list[KeywordSeries], list[Rejection]]:
    """Load every keyword that fully covers `window` with positive CPCs.

    Returns `(series, rejections)`. Series keep the keyword order of the file;
    rejections are sorted by keyword so reports are deterministic.
    """
    frame = read_cpc_csv(path)
    wanted = window.days()
    series, rejections = [], []

    for keyword in pd.unique(frame["keyword"]):
        rows = frame[frame["keyword"] == keyword]
        rows = rows[(rows["date"] >= window.start) & (rows["date"] <= window.end)]

        if rows["date"].duplicated().any():
            rejections.append(Rejection(keyword, REASON_DUPLICATE))
            continue
        rows = rows.sort_values("date")
        values = rows["cpc"].to_numpy()

        if len(values) and np.all(values == 0):
            rejections.append(Rejection(keyword, REASON_ZERO_CPC))
            continue
        if np.any(values <= 0):
            rejections.append(Rejection(keyword, REASON_NON_POSITIVE))
            continue
        if list(rows["date"]) != wanted:
            rejections.append(Rejection(keyword, REASON_GAP))
            continue

        series.append(KeywordSeries(str(keyword), tuple(rows["date"]), values))

    rejections.sort(key=lambda rej: rej.keyword)
    for rej in rejections:
        log.warning("dropped keyword '%s': %s", rej.keyword, rej.reason)
    log.debug("loaded %d keyword(s) for %s window %s..%s", len(series), window.role, window.start, window.end)
    return series, rejections



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Transformations ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def log_returns(series: KeywordSeries) -> LogReturnSeries:
    """Daily change rates of log CPCs."""
    if len(series) < 2:
        msg = f"{series.keyword_id}: need at least 2 observations for log returns, got {len(series)}"
        raise SeriesTooShortError(msg)
    return LogReturnSeries(series.keyword_id, series.dates[1:], np.diff(np.log(series.cpc)))


def reconstruct_cpc(first_cpc: float, returns: LogReturnSeries) -> np.ndarray:
    """Invert `log_returns`: first CPC times the exp-cumsum of the returns."""
    return first_cpc * np.exp(np.concatenate(([0.0], np.cumsum(returns.returns))))


def window_slice(series: KeywordSeries, window: DataWindow) -> KeywordSeries:
    """Restrict `series` to the days inside `window`."""
    keep = [i for i, day in enumerate(series.dates) if window.start <= day <= window.end]
    return KeywordSeries(series.keyword_id, [series.dates[i] for i in keep], series.cpc[keep])


def cpc_matrix(series: list[KeywordSeries]) -> np.ndarray:
    """Stack aligned series into a [day][keyword] array."""
    if not series:
        msg = "no series to stack"
        raise ValidationError(msg)
    dates = series[0].dates
    for item in series[1:]:
        if item.dates != dates:
            msg = f"series '{item.keyword_id}' is not aligned with '{series[0].keyword_id}'"
            raise ValidationError(msg)
    return np.column_stack([item.cpc for item in series])
