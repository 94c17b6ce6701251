"""Within-stratum PSU resampling, percentile intervals and seed derivation."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import ConfigError


def derive_seed(seed: int, *key: int) -> np.random.SeedSequence:
    """Independent, replayable child stream for ``key`` under ``seed``."""
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))


def child_int_seed(seed: int, *key: int) -> int:
    """Integer seed (64 bits) drawn from the ``key`` child stream."""
    return int(derive_seed(seed, *key).generate_state(1, np.uint64)[0])


def psu_multiplicities(stratum_code, cluster_code, rng: np.random.Generator) -> np.ndarray:
    """Per-unit selection counts for one within-stratum PSU bootstrap draw.

    In every stratum (taken in sorted code order) the ``m_h`` observed PSUs are
    resampled ``m_h`` times with replacement; each unit inherits the count of
    its PSU.
    """
    stratum_code = np.asarray(stratum_code)
    cluster_code = np.asarray(cluster_code)
    n_clusters = int(cluster_code.max()) + 1
    cluster_stratum = np.empty(n_clusters, dtype=np.intp)
    cluster_stratum[cluster_code] = stratum_code
    counts = np.zeros(n_clusters, dtype=np.int64)
    for h in np.unique(cluster_stratum):
        members = np.flatnonzero(cluster_stratum == h)
        draws = rng.integers(0, len(members), size=len(members))
        counts[members] = np.bincount(draws, minlength=len(members))
    return counts[cluster_code]


def iid_multiplicities(n: int, rng: np.random.Generator) -> np.ndarray:
    """Row counts of an ordinary nonparametric bootstrap of ``n`` rows."""
    return np.bincount(rng.integers(0, n, size=n), minlength=n)


def percentile_ci(replicates, alpha: float = 0.05) -> tuple:
    """Percentile interval from the ``ceil(alpha/2 * B)``-th and
    ``ceil((1 - alpha/2) * B)``-th order statistics (1-based)."""
    r = np.sort(np.asarray(replicates, float))
    B = len(r)
    if B == 0:
        raise ConfigError("no bootstrap replicates")
    lo = max(math.ceil(alpha / 2 * B), 1)
    hi = max(math.ceil((1 - alpha / 2) * B), 1)
    return float(r[lo - 1]), float(r[hi - 1])


def percentile_pvalue(replicates, null: float = 0.0) -> float:
    """Two-sided p-value from inverting the percentile interval at ``null``.

    This is the smallest ``alpha`` at which :func:`percentile_ci` excludes
    ``null``: ``min(1, 2 * min(#{r <= null}, #{r >= null}) / B)``.
    """
    r = np.asarray(replicates, float)
    if r.size == 0:
        raise ConfigError("no bootstrap replicates")
    tail = min(np.sum(r <= null), np.sum(r >= null))
    return float(min(1.0, 2.0 * tail / r.size))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``ROBUSTDE_THREADS``, else CPU count."""
    if threads is None:
        env = os.environ.get("ROBUSTDE_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"ROBUSTDE_THREADS must be an integer, got {env!r}") from None
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ConfigError("thread count must be at least 1")
    return threads


def parallel_map(fn, items, threads: int | None = None) -> list:
    """``list(map(fn, items))``, in worker processes when ``threads > 1``.

    Results come back in input order regardless of scheduling.
    """
    items = list(items)
    threads = min(resolve_threads(threads), max(len(items), 1))
    if threads <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))
