"""Run config access for all adoptions commands.

A run config is a flat YAML mapping. Every key has a built-in default (see
`DEFAULT_CONFIG`, mirrored in `configs/default.yml`); a user file only needs the
keys it changes.
"""

import datetime
import os

import yaml

from .errors import ConfigError
from .utils import stable_hash


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ CONSTANT ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
DEFAULT_CONFIG = """\
command: null
input: null
output_dir: out
train_start: null
train_end: null
test_start: null
test_end: null
calibration_window: training
keywords: null
c0: null
F: null
sigma: null
corr: null
m: 1
T_days: 31
r: 0.05
match: exact
weights: null
method: auto
model: GBM
k: 0.5
seed: 1
n_paths: 100000
n_steps: 31
n_trials: 100
n_delta_paths: 20000
epsilon: 0.05
d_conv: 30
rate_scale: 1.0
alpha_level: 0.05
lb_lags: null
n_similarity: 100
grid_points: 41
grid_low: 0.05
grid_high: 3.0
antithetic: false
workers: 1
verbose: false
"""

COMMANDS = ("calibrate", "gof", "price", "backtest", "revenue", "simulate", "similarity")
MODELS = ("GBM", "CEV", "MRD", "CIR", "HWV")
METHODS = ("auto", "mc", "bsm_closed", "dual_strike_closed", "quadrature")

# keys that must be positive integers when set
_POSITIVE_INTS = ("m", "n_paths", "n_steps", "n_trials", "n_delta_paths", "n_similarity", "grid_points", "workers")

# where and how a run executes; left out of the manifest hash
_RUN_ENVIRONMENT_KEYS = ("output_dir", "workers", "verbose")



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Config Class ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
class Config:
    """Config provides an abstraction of a YAML run config file.

    Values are read like a dict (`config["n_paths"]`). Defaults come from
    `DEFAULT_CONFIG`, then the given file, then keyword `overrides`
    (used by the CLI for flags like `--seed`).
    """

    def __init__(self, path: str | None = None, **overrides):
        """Load defaults, then the file at `path`, then `overrides`, and validate."""
        self.config = yaml.safe_load(DEFAULT_CONFIG)
        self.path = path

        if path is not None:
            if not os.path.exists(path):
                msg = f"config file '{path}' does not exist"
                raise ConfigError(msg)
            with open(path, encoding="utf-8") as conf:
                loaded = yaml.safe_load(conf.read()) or {}
            if not isinstance(loaded, dict):
                msg = f"config file '{path}' must be a flat key-value mapping"
                raise ConfigError(msg)
            self._update(loaded)

        self._update({key: val for key, val in overrides.items() if val is not None})
        self.validate()


    def _update(self, values: dict):
        unknown = sorted(set(values) - set(self.config))
        if unknown:
            msg = f"unknown config key(s): {', '.join(map(str, unknown))}"
            raise ConfigError(msg)
        self.config.update(values)


    def validate(self):
        """Check value types and ranges that do not depend on the command."""
        cfg = self.config
        if cfg["command"] is not None and cfg["command"] not in COMMANDS:
            msg = f"unknown command '{cfg['command']}' (expected one of {', '.join(COMMANDS)})"
            raise ConfigError(msg)
        if str(cfg["model"]).upper() not in MODELS:
            msg = f"unknown model '{cfg['model']}' (expected one of {', '.join(MODELS)})"
            raise ConfigError(msg)
        cfg["model"] = str(cfg["model"]).upper()
        if cfg["method"] not in METHODS:
            msg = f"unknown method '{cfg['method']}'"
            raise ConfigError(msg)
        if cfg["match"] not in ("exact", "broad"):
            msg = f"match must be 'exact' or 'broad', got '{cfg['match']}'"
            raise ConfigError(msg)
        if cfg["calibration_window"] not in ("training", "test"):
            msg = "calibration_window must be 'training' or 'test'"
            raise ConfigError(msg)

        for key in _POSITIVE_INTS:
            val = cfg[key]
            if isinstance(val, bool) or not isinstance(val, int) or val < 1:
                msg = f"'{key}' must be an integer >= 1, got {val!r}"
                raise ConfigError(msg)

        # seeds are always explicit integers; never drawn from the clock
        if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
            msg = f"'seed' must be a non-negative integer, got {cfg['seed']!r}"
            raise ConfigError(msg)

        for key in ("train_start", "train_end", "test_start", "test_end"):
            cfg[key] = _as_date(key, cfg[key])

        if cfg["epsilon"] < 0:
            msg = "'epsilon' must be >= 0"
            raise ConfigError(msg)
        if not 0 < cfg["alpha_level"] < 1:
            msg = "'alpha_level' must lie in (0, 1)"
            raise ConfigError(msg)
        if cfg["T_days"] <= 0:
            msg = "'T_days' must be > 0"
            raise ConfigError(msg)


    def require(self, *keys: str):
        """Raise ConfigError unless every key in `keys` is set."""
        missing = [key for key in keys if self.config.get(key) is None]
        if missing:
            msg = f"config is missing required key(s): {', '.join(missing)}"
            raise ConfigError(msg)


    def digest(self) -> str:
        """Stable hash of the effective config, recorded in run manifests.

        Output directory, worker count and verbosity are left out.
        """
        hashed = {key: val for key, val in self.config.items() if key not in _RUN_ENVIRONMENT_KEYS}
        return stable_hash(yaml.safe_dump(hashed, sort_keys=True, default_flow_style=True))


    def __getitem__(self, key):
        # get item passthrough
        return self.config[key]


    def __setitem__(self, key, new_val):
        if key not in self.config:
            msg = f"unknown config key: {key}"
            raise ConfigError(msg)
        self.config[key] = new_val


    def __repr__(self):
        return f"Config({self.path})"



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Functions ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def _as_date(key: str, value) -> datetime.date | None:
    """YAML already turns bare ISO dates into `date`; accept quoted strings too."""
    if value is None or isinstance(value, datetime.date):
        return value
    try:
        return datetime.date.fromisoformat(str(value))
    except ValueError as err:
        msg = f"'{key}' must be an ISO date (YYYY-MM-DD), got {value!r}"
        raise ConfigError(msg) from err
