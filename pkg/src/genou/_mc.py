"""Chunked Monte Carlo accumulation with deterministic reduction.

Per-path statistics are produced by a kernel in fixed-size chunks, each chunk
on its own derived stream; partial sums are merged in chunk order.  Results
are therefore identical for any worker count, and SEs/covariances come from
the accumulated first and second moments.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import seed_sequence

# Fixed chunk size: results must not depend on the worker count.
CHUNK = 8192


@dataclass
class MCStats:
    """Accumulated moments of named per-path statistics."""

    n: int = 0
    sums: dict = field(default_factory=dict)
    sumsq: dict = field(default_factory=dict)
    prods: dict = field(default_factory=dict)

    def add_chunk(self, values: dict):
        sizes = {v.size for v in values.values()}
        if len(sizes) != 1:
            raise ValueError("kernel returned statistics of unequal length")
        self.n += sizes.pop()
        names = sorted(values)
        for k in names:
            v = values[k]
            self.sums[k] = self.sums.get(k, 0.0) + float(np.sum(v))
            self.sumsq[k] = self.sumsq.get(k, 0.0) + float(np.sum(v * v))
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                key = (a, b)
                self.prods[key] = self.prods.get(key, 0.0) + float(np.sum(values[a] * values[b]))

    def mean(self, k: str) -> float:
        return self.sums[k] / self.n

    def var(self, k: str) -> float:
        m = self.mean(k)
        return max(0.0, (self.sumsq[k] - self.n * m * m) / (self.n - 1))

    def sem(self, k: str) -> float:
        return math.sqrt(self.var(k) / self.n)

    def cov(self, a: str, b: str) -> float:
        key = (a, b) if (a, b) in self.prods else (b, a)
        return (self.prods[key] - self.n * self.mean(a) * self.mean(b)) / (self.n - 1)

    def ratio(self, num: str, den: str, scale: float = 1.0) -> tuple[float, float]:
        """Delta-method mean and SE of scale * mean(num)/mean(den)."""
        mn, md = self.mean(num), self.mean(den)
        r = scale * mn / md
        rel = (
            self.var(num) / (mn * mn)
            + self.var(den) / (md * md)
            - 2.0 * self.cov(num, den) / (mn * md)
        ) / self.n
        return r, abs(r) * math.sqrt(max(0.0, rel))


def _run_chunk(kernel, args, seed, index, size):
    rng = np.random.default_rng(seed_sequence(seed, "chunk", index))
    return kernel(args, rng, size)


def mc_reduce(kernel, args, n_paths: int, seed, workers: int = 1) -> MCStats:
    """Accumulate kernel statistics over n_paths paths.

    ``kernel(args, rng, m)`` must return a dict of per-path arrays of length
    m and must be a module-level function (it crosses process boundaries when
    workers > 1).  Chunking is fixed at CHUNK paths regardless of workers.
    """
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(0, 2**63 - 1))
    sizes = [CHUNK] * (n_paths // CHUNK)
    if n_paths % CHUNK:
        sizes.append(n_paths % CHUNK)
    stats = MCStats()
    if workers <= 1 or len(sizes) <= 1:
        for i, m in enumerate(sizes):
            stats.add_chunk(_run_chunk(kernel, args, seed, i, m))
        return stats
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_chunk, kernel, args, seed, i, m) for i, m in enumerate(sizes)
        ]
        # merge in submission order: reduction is worker-count invariant
        for fut in futures:
            stats.add_chunk(fut.result())
    return stats


def identity_z(lhs: tuple[float, float], rhs: tuple[float, float]) -> float:
    """z-score of the difference of two (value, se) estimates."""
    num = lhs[0] - rhs[0]
    den = math.sqrt(lhs[1] ** 2 + rhs[1] ** 2)
    return num / den if den > 0 else (0.0 if num == 0 else math.inf)


def parallel_map(fn, jobs: list, workers: int = 1) -> list:
    """Map a module-level function over picklable jobs, preserving order.

    Results depend only on the job list, never on the worker count.
    """
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))
