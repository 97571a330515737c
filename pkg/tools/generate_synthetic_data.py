"""Generate a synthetic keyword CPC file for trying out the adoptions commands.

Each keyword follows a correlated GBM with daily steps, and the output uses the
same `keyword,date,cpc` layout as real data, so every command can run on it:

    python tools/generate_synthetic_data.py -o data/synthetic.csv -n 3 -d 62
    adoptions calibrate -c configs/examples/calibrate.yml -i data/synthetic.csv

`--zero-keyword` and `--gap-keyword` append keywords the loader rejects.
Keyword settings (initial CPC, drift, volatility) come from a small YAML file
when `--keywords` is given, otherwise from the built-in three-keyword market.
"""

import argparse
import datetime
import os
import time

import numpy as np
import pandas as pd
import yaml


# just used for printing the script time on completion:
START_TIME = time.time()

# argparser stuff:
PARSER = argparse.ArgumentParser(
prog='generate_synthetic_data',
description="""\
Write a correlated-GBM keyword CPC file in keyword,date,cpc format.
"""
)
PARSER.add_argument('-o', '--output', default='data/synthetic.csv', help='Destination CSV path.')
PARSER.add_argument('-k', '--keywords', help='YAML file listing keyword id, c0, mu and sigma.')
PARSER.add_argument('-n', '--count', type=int, default=3, help='Number of built-in keywords to use.')
PARSER.add_argument('-d', '--days', type=int, default=62, help='Number of daily observations.')
PARSER.add_argument('--start', default='2012-01-01', help='First date (YYYY-MM-DD).')
PARSER.add_argument('--rho', type=float, default=0.2, help='Pairwise correlation of daily shocks.')
PARSER.add_argument('-s', '--seed', type=int, default=1, help='Random seed.')
PARSER.add_argument('--zero-keyword', action='store_true', help='Add a keyword whose CPC is always 0.')
PARSER.add_argument('--gap-keyword', action='store_true', help='Add a keyword with one missing day.')
PARSER.add_argument('-v', '--verbose', action='store_true')
SCRIPT_ARGS = PARSER.parse_args()


DEFAULT_KEYWORDS = [
    {"id": "canon cameras", "c0": 3.5, "mu": 0.05, "sigma": 0.2263},
    {"id": "nikon cameras", "c0": 4.5, "mu": 0.05, "sigma": 0.3},
    {"id": "sony cameras", "c0": 6.0, "mu": 0.05, "sigma": 0.25},
    {"id": "camera lenses", "c0": 2.2, "mu": 0.0, "sigma": 0.35},
]

DAYS_PER_YEAR = 365.0



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ MAIN ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def main():
    """
    Main script body.

    This file is organized such that the "main" logic lives near the top,
    and all of the functions/classes used here are defined below.
    """
    keywords = load_keywords(SCRIPT_ARGS.keywords, SCRIPT_ARGS.count)
    vprint(f"Keywords: {bcolors.OKCYAN}{[kw['id'] for kw in keywords]}{bcolors.ENDC}")

    start = datetime.date.fromisoformat(SCRIPT_ARGS.start)
    values = simulate(keywords, SCRIPT_ARGS.days, SCRIPT_ARGS.rho, SCRIPT_ARGS.seed)

    rows = []
    for i, keyword in enumerate(keywords):
        for day in range(SCRIPT_ARGS.days):
            date = start + datetime.timedelta(days=day)
            rows.append((keyword["id"], date.isoformat(), values[day, i]))

    # keywords that the loader should reject
    if SCRIPT_ARGS.zero_keyword:
        rows += [("zero keyword", (start + datetime.timedelta(days=day)).isoformat(), 0.0)
                 for day in range(SCRIPT_ARGS.days)]
    if SCRIPT_ARGS.gap_keyword:
        skipped = SCRIPT_ARGS.days // 2
        rows += [("gap keyword", (start + datetime.timedelta(days=day)).isoformat(), values[day, 0])
                 for day in range(SCRIPT_ARGS.days) if day != skipped]
        vprint(f"{bcolors.OKCYAN}gap keyword skips day {skipped}{bcolors.ENDC}")

    out_dir = os.path.dirname(SCRIPT_ARGS.output)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    pd.DataFrame(rows, columns=["keyword", "date", "cpc"]).to_csv(
        SCRIPT_ARGS.output, index=False, float_format="%.6f", lineterminator="\n",
    )

    print(
        f"{bcolors.OKGREEN}Wrote {len(keywords)} keyword(s) x {SCRIPT_ARGS.days} days to "
        f"{SCRIPT_ARGS.output} in {time.time() - START_TIME:.2f}s.{bcolors.ENDC}"
    )



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Classes ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
class bcolors:
    """Small helper for print output coloring."""
    HEADER = '\033[95m'
    OKBLUE = '\033[94m'
    OKCYAN = '\033[96m'
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'
    UNDERLINE = '\033[4m'



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Functions ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def load_keywords(path, count) -> list:
    """Read keyword settings from `path`, or take the first `count` built-in ones."""
    if path is None:
        if not 1 <= count <= len(DEFAULT_KEYWORDS):
            print(f"{bcolors.FAIL}--count must be between 1 and {len(DEFAULT_KEYWORDS)}.{bcolors.ENDC}")
            raise SystemExit(2)
        return DEFAULT_KEYWORDS[:count]

    with open(path, encoding="utf-8") as file:
        keywords = yaml.safe_load(file.read())
    for keyword in keywords:
        missing = {"id", "c0", "mu", "sigma"} - set(keyword)
        if missing:
            print(f"{bcolors.FAIL}Keyword entry {keyword} is missing {sorted(missing)}.{bcolors.ENDC}")
            raise SystemExit(2)
    return keywords


def simulate(keywords, days, rho, seed) -> np.ndarray:
    """Daily correlated GBM values, shape [day][keyword]."""
    n = len(keywords)
    corr = np.full((n, n), rho)
    np.fill_diagonal(corr, 1.0)
    lower = np.linalg.cholesky(corr)

    c0 = np.array([kw["c0"] for kw in keywords], dtype=float)
    mu = np.array([kw["mu"] for kw in keywords], dtype=float)
    sigma = np.array([kw["sigma"] for kw in keywords], dtype=float)

    dt = 1 / DAYS_PER_YEAR
    rng = np.random.default_rng(seed)
    shocks = rng.standard_normal((days - 1, n)) @ lower.T
    steps = (mu - 0.5 * sigma**2) * dt + sigma * np.sqrt(dt) * shocks
    log_path = np.vstack((np.zeros(n), np.cumsum(steps, axis=0)))
    return c0 * np.exp(log_path)


def vprint(text):
    """Print only in verbose mode."""
    if SCRIPT_ARGS.verbose:
        print(text)


if __name__ == "__main__":
    main()
