"""Deterministic report writing: CSV tables and the per-run manifest."""

import json
import os

import numpy as np
import pandas as pd
import scipy
import statsmodels
import yaml

from .log import get_logger


log = get_logger(__name__)


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ CONSTANT ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# fixed float rendering keeps report bytes identical across runs
FLOAT_FORMAT = "%.10g"
MANIFEST_NAME = "manifest.json"



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Functions ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def write_csv(frame: pd.DataFrame, output_dir: str, name: str, *, index: bool = False) -> str:
    """Write `frame` to `output_dir/name` and return the path."""
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, name)
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    log.info("wrote %s (%d rows)", path, len(frame))
    return path


def module_versions() -> dict:
    """Versions of this package and its numeric stack."""
    from . import __version__

    return {
        "adoptions": __version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "statsmodels": statsmodels.__version__,
        "pyyaml": yaml.__version__,
    }


def write_manifest(output_dir: str, config, outputs: list[str], seeds: dict | None = None) -> str:
    """Record the config hash, seeds, versions and output files of one run."""
    os.makedirs(output_dir, exist_ok=True)
    manifest = {
        "command": config["command"],
        "config_hash": config.digest(),
        "seeds": seeds if seeds is not None else {"seed": config["seed"]},
        "versions": module_versions(),
        "outputs": sorted(os.path.basename(path) for path in outputs),
    }
    path = os.path.join(output_dir, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as file:
        json.dump(manifest, file, indent=2, sort_keys=True)
        file.write("\n")
    return path
