"""Seeded synthetic observations about model means.

Every draw is a pure function of ``(seed, j, m, i)``: time index, species
index and replicate index. A splitmix64-style hash of the key gives 53
uniform bits, and the standard-normal inverse CDF turns them into a
normal variate. Changing the replicate count therefore never perturbs the
other draws, and generation order does not matter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import ndtri

from ._validation import check_counts, check_times
from .exceptions import DomainError
from .likelihood import Dataset
from .models import ModelSpec, means_from_full

__all__ = ["SynthConfig", "generate", "counter_uniform", "counter_normal"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _hash(seed, j, m, i):
    with np.errstate(over="ignore"):
        h = _mix(np.asarray(seed, dtype=np.uint64) + _GOLDEN)
        for idx in (j, m, i):
            h = _mix(h + (np.asarray(idx, dtype=np.uint64) + np.uint64(1)) * _GOLDEN)
    return h


def counter_uniform(seed, j, m, i):
    """Uniform variates in the open interval (0, 1) keyed by ``(seed, j, m, i)``.

    Index arguments broadcast against each other.
    """
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    h = _hash(np.uint64(seed), j, m, i)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def counter_normal(seed, j, m, i):
    """Standard-normal variates keyed by ``(seed, j, m, i)``."""
    return ndtri(counter_uniform(seed, j, m, i))


@dataclass(frozen=True, eq=False)
class SynthConfig:
    """Synthetic-data settings.

    Parameters
    ----------
    spec : ModelSpec
        Model family and observed species.
    theta_true : mapping
        True values of the family parameters. Parameters missing here are
        taken from ``spec.fixed``. ``sigma`` may be zero (noise-free data).
    times : array_like
        Observation times.
    counts : int or array_like of int
        Replicates per time point (each species gets this many).
    seed : int
        Unsigned 64-bit seed.
    """

    spec: ModelSpec
    theta_true: Mapping[str, float]
    times: np.ndarray
    counts: np.ndarray
    seed: int = 0

    def __post_init__(self):
        times = check_times(self.times)
        counts = check_counts(self.counts, times.size)
        truth = dict(self.spec.fixed)
        truth.update({k: float(v) for k, v in dict(self.theta_true).items()})
        unknown = set(truth) - set(self.spec.parameters)
        if unknown:
            raise DomainError(f"unknown parameters {sorted(unknown)}")
        missing = set(self.spec.parameters) - set(truth)
        if missing:
            raise DomainError(f"true values missing for {sorted(missing)}")
        if not truth["sigma"] >= 0:
            raise DomainError(f"sigma must be non-negative, got {truth['sigma']}")
        seed = int(self.seed)
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "theta_true", truth)
        object.__setattr__(self, "seed", seed)

    @property
    def sigma(self):
        return self.theta_true["sigma"]


def generate(config: SynthConfig) -> Dataset:
    """Draw ``x = mu_m(theta, t_j) + sigma * z(seed, j, m, i)`` for every cell.

    Negative draws are kept; with ``sigma == 0`` every observation equals
    the model mean exactly.
    """
    spec = config.spec
    means = means_from_full(spec, config.theta_true, config.times)
    M = len(spec.species)
    blocks = []
    for j, n in enumerate(config.counts):
        i = np.arange(n)[:, None]
        m = np.arange(M)[None, :]
        blocks.append(means[j][None, :] + config.sigma * counter_normal(config.seed, j, m, i))
    return Dataset(config.times, tuple(blocks), spec.species)
