"""Common utilities for adoptions core modules."""

import hashlib

import numpy as np

from .errors import ValidationError


# Calendar-day year used everywhere: dt = 1/365, a d-day horizon is d/365.
DAYS_PER_YEAR = 365.0


def days_to_years(days: float) -> float:
    """Convert a calendar-day count to years."""
    return days / DAYS_PER_YEAR


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Return `values` as a 1-D float array (scalars become length 1)."""
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        msg = f"{name} must be one-dimensional, got shape {arr.shape}"
        raise ValidationError(msg)
    return arr


def substream_seed(master_seed: int, *counters: int) -> np.random.SeedSequence:
    """Derive an independent seed sequence for a (block, step, ...) counter tuple.

    Substreams depend only on the master seed and the counters, never on the order
    in which they are requested, so parallel generation stays reproducible.
    """
    return np.random.SeedSequence([int(master_seed), *[int(c) for c in counters]])


def stable_hash(text: str) -> str:
    """Short sha256 digest used in run manifests."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def derive_seed(master_seed: int, *counters: int) -> int:
    """Integer seed for a (trial, ...) counter tuple, for APIs that take plain ints."""
    return int(substream_seed(master_seed, *counters).generate_state(1, dtype=np.uint32)[0])
