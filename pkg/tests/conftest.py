import datetime

import numpy as np
import pandas as pd
import pytest
import yaml

from adoptions.calibration import CorrMatrix
from adoptions.pricing import OptionSpec


START = datetime.date(2012, 1, 1)
T_31 = 31 / 365


def gbm_cpc(n_days, c0, sigma, mu=0.0, seed=0):
    """Daily GBM CPC series (annual mu and sigma)."""
    rng = np.random.default_rng(seed)
    dt = 1 / 365
    steps = (mu - 0.5 * sigma**2) * dt + sigma * np.sqrt(dt) * rng.standard_normal(n_days - 1)
    return c0 * np.exp(np.concatenate(([0.0], np.cumsum(steps))))


def dated(start, n):
    return [start + datetime.timedelta(days=i) for i in range(n)]


@pytest.fixture
def write_cpc_csv(tmp_path):
    """Write `{keyword: values}` as a keyword,date,cpc CSV starting at START."""

    def _write(columns, name="cpc.csv", start=START):
        rows = []
        for keyword, values in columns.items():
            for day, value in zip(dated(start, len(values)), values):
                rows.append((keyword, day.isoformat(), value))
        path = tmp_path / name
        pd.DataFrame(rows, columns=["keyword", "date", "cpc"]).to_csv(path, index=False)
        return str(path)

    return _write


@pytest.fixture
def write_config(tmp_path):
    """Write a YAML run config and return its path."""

    def _write(values, name="run.yml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(values), encoding="utf-8")
        return str(path)

    return _write


@pytest.fixture
def one_keyword_spec():
    return OptionSpec(("canon cameras",), [3.8505], m=100, T=T_31, r=0.05)


@pytest.fixture
def three_keyword_market():
    """3-keyword market with the fixed CPCs of the reference camera market."""
    spec = OptionSpec(("k1", "k2", "k3"), [3.8505, 4.6704, 6.2520], m=100, T=T_31, r=0.05)
    c0 = np.array([3.5, 4.5, 6.0])
    sigma = np.array([0.2263, 0.3, 0.25])
    corr = CorrMatrix.from_value([[1.0, 0.2247, 0.1], [0.2247, 1.0, 0.3], [0.1, 0.3, 1.0]], 3, spec.keywords)
    return spec, c0, sigma, corr
