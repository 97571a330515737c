"""Correlated sample paths for GBM and the non-GBM CPC dynamics.

Supported dynamics (k is the mean-reversion speed, mu the drift for GBM/CEV and
the long-run CPC level for the mean-reverting kinds):

    GBM  dC = mu C dt + sigma C dW
    CEV  dC = mu C dt + sigma C^(1/2) dW
    MRD  dC = k (mu - C) dt + sigma C^(1/2) dW
    CIR  dC = k (mu - C) dt + sigma^(1/2) C dW
    HWV  dC = k (mu - C) dt + sigma dW

Under the risk-neutral drift mode the drift term of every kind becomes r C.

Noise contract: standard normals are drawn in fixed blocks of paths, each block
from its own Philox stream keyed by (seed, block). The block layout depends only
on `n_paths`, so results are bit-identical for any `workers` count. Every
simulator also accepts a precomputed `noise` array so experiments can share
common random numbers.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .calibration import Calibration, CorrMatrix, check_psd
from .errors import DimensionMismatchError, FactorizationError, ValidationError
from .log import get_logger
from .utils import as_vector, substream_seed


log = get_logger(__name__)


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ CONSTANT ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
MODEL_KINDS = ("GBM", "CEV", "MRD", "CIR", "HWV")
MEAN_REVERTING = ("MRD", "CIR", "HWV")
# kinds whose state is floored at zero (full truncation)
NONNEGATIVE = ("CEV", "MRD", "CIR")
DEFAULT_K = 0.5

_BLOCK_PATHS = 4096
# pivots below this are treated as exact zeros in the semidefinite factorization
_PIVOT_TOLERANCE = 1e-12



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Classes ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
@dataclass(frozen=True)
class DriftMode:
    """Real-world drift (`mu` of the model) or risk-neutral drift `r`."""

    kind: str = "real"
    r: float = 0.0

    def __post_init__(self):
        if self.kind not in ("real", "risk_neutral"):
            msg = f"drift mode must be 'real' or 'risk_neutral', got '{self.kind}'"
            raise ValidationError(msg)

    @classmethod
    def real(cls) -> "DriftMode":
        """Use the model's own drift."""
        return cls("real", 0.0)

    @classmethod
    def risk_neutral(cls, r: float) -> "DriftMode":
        """Replace the drift by r C."""
        return cls("risk_neutral", float(r))

    @property
    def is_risk_neutral(self) -> bool:
        """True for the pricing measure."""
        return self.kind == "risk_neutral"


@dataclass(frozen=True)
class SdeModel:
    """One of the supported dynamics with per-keyword parameters."""

    kind: str
    mu: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    k: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        kind = str(self.kind).upper()
        if kind not in MODEL_KINDS:
            msg = f"unknown model '{self.kind}' (expected one of {', '.join(MODEL_KINDS)})"
            raise ValidationError(msg)
        mu = as_vector(self.mu, "mu")
        sigma = as_vector(self.sigma, "sigma")
        k = as_vector(DEFAULT_K if self.k is None else self.k, "k")
        if len(k) == 1 and len(sigma) > 1:
            k = np.full(len(sigma), k[0])
        if not len(mu) == len(sigma) == len(k):
            msg = f"mu, sigma, k lengths differ: {len(mu)}, {len(sigma)}, {len(k)}"
            raise DimensionMismatchError(msg)
        if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
            msg = "sigma must be finite and >= 0"
            raise ValidationError(msg)
        if kind in MEAN_REVERTING and np.any(k <= 0):
            msg = f"{kind} needs a mean-reversion speed k > 0"
            raise ValidationError(msg)
        for name, arr in (("mu", mu), ("sigma", sigma), ("k", k)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "kind", kind)

    @property
    def n(self) -> int:
        """Keyword count."""
        return len(self.sigma)

    @classmethod
    def gbm(cls, sigma, mu=0.0) -> "SdeModel":
        """Plain GBM; `mu` broadcasts over keywords."""
        sigma = as_vector(sigma, "sigma")
        return cls("GBM", np.broadcast_to(as_vector(mu, "mu"), sigma.shape).copy(), sigma)

    @classmethod
    def from_calibration(cls, calibration: Calibration, kind: str = "GBM", k: float = DEFAULT_K) -> "SdeModel":
        """Build a model from calibrated parameters.

        GBM and CEV take the estimated drift; the mean-reverting kinds use the
        window-mean CPC as their long-run level.
        """
        kind = str(kind).upper()
        mu = calibration.mean_cpc if kind in MEAN_REVERTING else calibration.mu
        return cls(kind, mu, calibration.sigma, np.full(len(calibration.params), float(k)))


@dataclass(frozen=True)
class PathSet:
    """Simulated CPC paths, values[path][step][keyword]; step 0 is the initial CPC."""

    kind: str
    values: np.ndarray = field(repr=False)
    dt: float
    seed: int
    # HWV paths that went below zero somewhere
    negative_paths: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            msg = f"path values must be 3-D [path][step][keyword], got shape {values.shape}"
            raise ValidationError(msg)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_paths(self) -> int:
        """Number of simulated paths."""
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        """Number of time steps (time points minus one)."""
        return self.values.shape[1] - 1

    @property
    def n_keywords(self) -> int:
        """Number of keywords."""
        return self.values.shape[2]

    def times(self) -> np.ndarray:
        """Time of each step in years."""
        return np.arange(self.n_steps + 1) * self.dt

    def terminal(self) -> np.ndarray:
        """Values at the last step, [path][keyword]."""
        return self.values[:, -1, :]



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Noise ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def correlation_factor(corr: CorrMatrix) -> np.ndarray:
    """Lower-triangular L with L L^T = corr.

    Falls back to a semidefinite column-by-column factorization when the matrix
    is singular (e.g. rho = 1), zeroing columns whose pivot vanishes.
    """
    rho = np.asarray(corr.rho, dtype=float)
    try:
        return np.linalg.cholesky(rho)
    except np.linalg.LinAlgError:
        pass

    rho, _ = check_psd(corr)
    rho = np.asarray(rho.rho)
    n = rho.shape[0]
    lower = np.zeros((n, n))
    for j in range(n):
        pivot = rho[j, j] - np.dot(lower[j, :j], lower[j, :j])
        if pivot < -1e-8:
            msg = f"correlation matrix is not positive semidefinite (pivot {pivot:.3g} at column {j})"
            raise FactorizationError(msg)
        if pivot <= _PIVOT_TOLERANCE:
            continue
        lower[j, j] = np.sqrt(pivot)
        for i in range(j + 1, n):
            lower[i, j] = (rho[i, j] - np.dot(lower[i, :j], lower[j, :j])) / lower[j, j]

    if not np.allclose(lower @ lower.T, rho, atol=1e-8):
        msg = "semidefinite factorization does not reproduce the correlation matrix"
        raise FactorizationError(msg)
    return lower


def _block_normals(seed: int, block: int, shape: tuple) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(substream_seed(seed, block)))
    return rng.standard_normal(shape)


def sample_correlated_normals(
        corr: CorrMatrix,
        n_paths: int,
        n_steps: int,
        seed: int,
        *,
        antithetic: bool = False,
        workers: int = 1,
        ) -> np.ndarray:
    """Standard normals with correlation `corr`, shape [path][step][keyword].

    With `antithetic=True` the second half of the paths mirrors the first.
    """
    if n_paths < 1 or n_steps < 1:
        msg = f"need n_paths >= 1 and n_steps >= 1, got {n_paths}, {n_steps}"
        raise ValidationError(msg)
    lower = correlation_factor(corr)
    n = corr.n

    n_draw = (n_paths + 1) // 2 if antithetic else n_paths
    starts = list(range(0, n_draw, _BLOCK_PATHS))
    shapes = [(min(_BLOCK_PATHS, n_draw - start), n_steps, n) for start in starts]

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_block_normals, [seed] * len(starts), range(len(starts)), shapes))
    else:
        blocks = [_block_normals(seed, b, shape) for b, shape in enumerate(shapes)]

    white = np.concatenate(blocks, axis=0)
    if antithetic:
        white = np.concatenate((white, -white), axis=0)[:n_paths]
    return white @ lower.T


def _check_noise(noise: np.ndarray, n_paths: int, n_steps: int, n: int) -> np.ndarray:
    noise = np.asarray(noise, dtype=float)
    if noise.ndim == 2:
        noise = noise[:, None, :]
    if noise.shape != (n_paths, n_steps, n):
        msg = f"noise has shape {noise.shape}, expected {(n_paths, n_steps, n)}"
        raise DimensionMismatchError(msg)
    return noise



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Simulation ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def _drift_vector(model: SdeModel, drift: DriftMode) -> np.ndarray:
    return np.full(model.n, drift.r) if drift.is_risk_neutral else np.asarray(model.mu)


def _gbm_step(c: np.ndarray, drift: np.ndarray, sigma: np.ndarray, dt: float, z: np.ndarray) -> np.ndarray:
    """Exact log-normal transition over `dt`."""
    return c * np.exp((drift - 0.5 * sigma**2) * dt + sigma * np.sqrt(dt) * z)


def _validate_inputs(c0, model: SdeModel, corr: CorrMatrix, T: float) -> np.ndarray:
    c0 = as_vector(c0, "c0")
    if len(c0) != model.n or corr.n != model.n:
        msg = f"c0 ({len(c0)}), model ({model.n}) and corr ({corr.n}) dimensions differ"
        raise DimensionMismatchError(msg)
    if not T > 0:
        msg = f"horizon T must be > 0, got {T}"
        raise ValidationError(msg)
    return c0


def simulate_terminal_gbm(
        c0,
        model: SdeModel,
        corr: CorrMatrix,
        T: float,
        drift: DriftMode,
        n_paths: int,
        seed: int,
        *,
        noise: np.ndarray | None = None,
        antithetic: bool = False,
        workers: int = 1,
        ) -> np.ndarray:
    """Exact one-step terminal sampling of correlated GBM, shape [path][keyword]."""
    if model.kind != "GBM":
        msg = f"terminal sampling is exact only for GBM, got {model.kind}"
        raise ValidationError(msg)
    c0 = _validate_inputs(c0, model, corr, T)
    if np.any(c0 <= 0):
        msg = "GBM needs c0 > 0"
        raise ValidationError(msg)

    if noise is None:
        noise = sample_correlated_normals(corr, n_paths, 1, seed, antithetic=antithetic, workers=workers)
    noise = _check_noise(noise, n_paths, 1, model.n)
    return _gbm_step(c0, _drift_vector(model, drift), model.sigma, T, noise[:, 0, :])


def _euler_step(kind: str, c: np.ndarray, model: SdeModel, drift_mode: DriftMode, dt: float, z: np.ndarray):
    """One Euler-Maruyama step with full truncation for the square-root terms."""
    pos = np.maximum(c, 0.0)
    sigma, k, mu = model.sigma, model.k, model.mu

    if drift_mode.is_risk_neutral:
        drift = drift_mode.r * c
    elif kind in ("GBM", "CEV"):
        drift = mu * c
    else:
        drift = k * (mu - c)

    if kind == "CEV" or kind == "MRD":
        diffusion = sigma * np.sqrt(pos)
    elif kind == "CIR":
        diffusion = np.sqrt(sigma) * pos
    else:  # HWV
        diffusion = np.broadcast_to(sigma, c.shape)

    nxt = c + drift * dt + diffusion * np.sqrt(dt) * z
    if kind in NONNEGATIVE:
        nxt = np.maximum(nxt, 0.0)
    return nxt


def simulate_path(
        c0,
        model: SdeModel,
        corr: CorrMatrix,
        T: float,
        n_steps: int,
        drift: DriftMode,
        n_paths: int,
        seed: int,
        *,
        noise: np.ndarray | None = None,
        antithetic: bool = False,
        workers: int = 1,
        ) -> PathSet:
    """Simulate full paths on an equidistant grid of `n_steps` steps over [0, T].

    GBM uses exact log-Euler stepping; the other kinds use Euler-Maruyama.
    """
    c0 = _validate_inputs(c0, model, corr, T)
    if n_steps < 1:
        msg = f"n_steps must be >= 1, got {n_steps}"
        raise ValidationError(msg)
    if model.kind == "GBM" and np.any(c0 <= 0):
        msg = "GBM needs c0 > 0"
        raise ValidationError(msg)

    if noise is None:
        noise = sample_correlated_normals(corr, n_paths, n_steps, seed, antithetic=antithetic, workers=workers)
    noise = _check_noise(noise, n_paths, n_steps, model.n)

    dt = T / n_steps
    values = np.empty((n_paths, n_steps + 1, model.n))
    values[:, 0, :] = c0
    drift_vec = _drift_vector(model, drift)

    for step in range(n_steps):
        current = values[:, step, :]
        if model.kind == "GBM":
            values[:, step + 1, :] = _gbm_step(current, drift_vec, model.sigma, dt, noise[:, step, :])
        else:
            values[:, step + 1, :] = _euler_step(model.kind, current, model, drift, dt, noise[:, step, :])

    negative = int(np.sum(np.any(values < 0, axis=(1, 2))))
    if negative:
        log.warning("%d of %d %s paths went below zero", negative, n_paths, model.kind)
    return PathSet(model.kind, values, dt, seed, negative)



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Reports ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def paths_frame(paths: PathSet, keyword_ids=None) -> pd.DataFrame:
    """Long-format `path,step,keyword,value` table."""
    n_paths, n_times, n = paths.values.shape
    ids = list(keyword_ids) if keyword_ids is not None else [f"k{i + 1}" for i in range(n)]
    path_idx, step_idx, kw_idx = np.meshgrid(np.arange(n_paths), np.arange(n_times), np.arange(n), indexing="ij")
    return pd.DataFrame({
        "path": path_idx.ravel(),
        "step": step_idx.ravel(),
        "keyword": np.asarray(ids, dtype=object)[kw_idx.ravel()],
        "value": paths.values.ravel(),
    })
