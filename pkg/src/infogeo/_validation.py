"""Input validation helpers shared by the functional API and the estimator."""

from __future__ import annotations

from typing import Mapping

import numpy as np


def check_times(times, name="times"):
    """Return ``times`` as a float vector, strictly increasing and >= 0."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.ndim != 1 or times.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(times)):
        raise ValueError(f"{name} must be finite")
    if times[0] < 0:
        raise ValueError(f"{name} must be non-negative, got {times[0]}")
    if np.any(np.diff(times) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return times


def check_counts(counts, n_times):
    """Broadcast a scalar or per-time count to an int vector of length ``n_times``."""
    counts = np.asarray(counts)
    if counts.ndim == 0:
        counts = np.full(n_times, int(counts))
    if counts.shape != (n_times,):
        raise ValueError(f"counts must be a scalar or have length {n_times}")
    if np.any(counts != np.round(counts)) or np.any(counts < 1):
        raise ValueError("counts must be positive integers")
    return counts.astype(int)


def check_box(box, names, *, allow_none=False):
    """Normalise a parameter box to ``(lo, hi)`` float arrays.

    ``box`` may be a mapping ``name -> (lo, hi)`` or an array of shape
    ``(len(names), 2)``.
    """
    if box is None:
        if allow_none:
            return None
        raise ValueError("a parameter box is required")
    if isinstance(box, Mapping):
        missing = [n for n in names if n not in box]
        if missing:
            raise ValueError(f"box is missing parameters {missing}")
        arr = np.array([box[n] for n in names], dtype=float)
    else:
        arr = np.asarray(box, dtype=float)
    if arr.shape != (len(names), 2):
        raise ValueError(f"box must have shape ({len(names)}, 2), got {arr.shape}")
    lo, hi = arr[:, 0].copy(), arr[:, 1].copy()
    if np.any(np.isnan(arr)) or np.any(hi <= lo):
        raise ValueError(f"box must satisfy lo < hi for every parameter, got {arr.tolist()}")
    return lo, hi


def check_alpha(alpha):
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def check_resolution(resolution):
    if isinstance(resolution, (int, np.integer)):
        resolution = (int(resolution), int(resolution))
    r1, r2 = (int(r) for r in resolution)
    if r1 < 2 or r2 < 2:
        raise ValueError(f"grid resolution must be at least 2, got {resolution}")
    return r1, r2
