"""Monte Carlo plumbing: estimates, stream derivation and chunked drivers.

Every chunk of samples gets its own counter-based generator derived from
``(seed, chunk_index)``, and chunk results are merged in index order, so the
output depends only on the seed, the sample count and the chunk size.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

DEFAULT_CHUNK = 500


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: Optional[int] = None
    elapsed: float = 0.0
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("an MC estimate needs at least two samples")
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")

    def zscore(self, target: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == target else math.inf
        return (self.mean - target) / self.stderr

    def agrees(self, target: float, n_sigma: float = 3.0) -> bool:
        return abs(self.mean - target) <= n_sigma * self.stderr


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for stream ``index`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(n_samples: int, chunk: int = DEFAULT_CHUNK):
    full, rest = divmod(int(n_samples), int(chunk))
    return [chunk] * full + ([rest] if rest else [])


def run_chunks(fn: Callable[[np.random.Generator, int], np.ndarray], n_samples: int,
               seed: int, chunk: int = DEFAULT_CHUNK, workers: int = 1) -> np.ndarray:
    """Evaluate ``fn(rng, size)`` per chunk and stack the results in order.

    ``fn`` returns an array whose first axis has length ``size``.
    """
    sizes = chunk_sizes(n_samples, chunk)
    jobs = [(i, s) for i, s in enumerate(sizes)]

    def one(job):
        i, s = job
        return np.asarray(fn(stream(seed, i), s))

    if workers <= 1 or len(jobs) == 1:
        parts = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, jobs))
    return np.concatenate(parts, axis=0)


def fsum_mean(x: np.ndarray) -> float:
    return math.fsum(np.asarray(x, dtype=float).ravel()) / np.size(x)


def estimate(values: np.ndarray, seed: Optional[int] = None, started: Optional[float] = None,
             **extras) -> MCEstimate:
    """Mean and standard error with compensated, order-fixed summation."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    mean = fsum_mean(v)
    var = math.fsum((v - mean) ** 2) / (n - 1) if n > 1 else 0.0
    elapsed = time.perf_counter() - started if started is not None else 0.0
    return MCEstimate(mean, math.sqrt(var / n), n, seed, elapsed, dict(extras))


def covariance_estimate(x: np.ndarray, y: np.ndarray, seed: Optional[int] = None,
                        started: Optional[float] = None) -> MCEstimate:
    """Sample covariance with a standard error from the centered products."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    prod = (x - fsum_mean(x)) * (y - fsum_mean(y))
    cov = math.fsum(prod) / (n - 1)
    spread = math.sqrt(math.fsum((prod - cov) ** 2) / (n - 1))
    elapsed = time.perf_counter() - started if started is not None else 0.0
    return MCEstimate(cov, spread / math.sqrt(n), n, seed, elapsed)
