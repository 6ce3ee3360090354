"""Seeded Monte Carlo plumbing: stream splitting, block runners, accumulators.

Trials are cut into fixed-size blocks.  Block ``b`` of a run with master seed
``s`` always draws from ``SeedSequence(s, spawn_key=(b,))``, so results are
identical whether blocks run serially or on a thread pool.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, TypeVar

import numpy as np
from scipy import stats as _sps

BLOCK_SIZE = 1 << 16

T = TypeVar("T")


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Deterministic stream for one block of trials."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def seeding_note(seed: int, block_size: int = BLOCK_SIZE) -> str:
    return f"SeedSequence({seed}, spawn_key=(block,)) per {block_size}-trial block"


def block_sizes(trials: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(trials, block_size)
    return [block_size] * full + ([rest] if rest else [])


def run_blocks(
    fn: Callable[[int, np.random.Generator], T],
    trials: int,
    seed: int,
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
    merge: Callable[[T, T], T] | None = None,
) -> T | list[T]:
    """Run ``fn(block_trials, rng)`` over all blocks and merge the results.

    Without ``merge`` the per-block results are returned in block order.
    """
    sizes = block_sizes(trials, block_size)
    jobs = [(size, block_rng(seed, b)) for b, size in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: fn(*job), jobs))
    else:
        results = [fn(*job) for job in jobs]
    if merge is None:
        return results
    return reduce(merge, results)


@dataclass
class TrajectoryStats:
    """Mergeable accumulator for scalar Monte Carlo outcomes.

    Finite observations feed running moments and an integer histogram;
    censored trials are only counted.
    """

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0
    censored: int = 0
    histogram: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    seed: int | None = None

    @classmethod
    def from_samples(cls, values, censored: int = 0, seed: int | None = None):
        values = np.asarray(values)
        hist = np.zeros(0, dtype=np.int64)
        if values.size and np.issubdtype(values.dtype, np.integer):
            hist = np.bincount(values.astype(np.int64))
        v = values.astype(float)
        return cls(
            count=int(v.size),
            total=float(v.sum()),
            total_sq=float((v * v).sum()),
            censored=int(censored),
            histogram=hist,
            seed=seed,
        )

    def merge(self, other: "TrajectoryStats") -> "TrajectoryStats":
        if self.seed is not None and other.seed is not None and self.seed != other.seed:
            raise ValueError("cannot merge accumulators from different master seeds")
        size = max(self.histogram.size, other.histogram.size)
        hist = np.zeros(size, dtype=np.int64)
        hist[: self.histogram.size] += self.histogram
        hist[: other.histogram.size] += other.histogram
        return TrajectoryStats(
            count=self.count + other.count,
            total=self.total + other.total,
            total_sq=self.total_sq + other.total_sq,
            censored=self.censored + other.censored,
            histogram=hist,
            seed=self.seed if self.seed is not None else other.seed,
        )

    __add__ = merge

    @property
    def trials(self) -> int:
        return self.count + self.censored

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else float("nan")

    @property
    def variance(self) -> float:
        if self.count < 2:
            return float("nan")
        m = self.mean
        return max(self.total_sq / self.count - m * m, 0.0) * self.count / (self.count - 1)

    @property
    def stderr(self) -> float:
        return float(np.sqrt(self.variance / self.count)) if self.count > 1 else float("nan")

    def quantile(self, q: float) -> float:
        """Quantile of the full law, censored trials counted as +inf."""
        if self.trials == 0:
            return float("nan")
        target = q * self.trials
        cum = np.cumsum(self.histogram)
        idx = int(np.searchsorted(cum, target, side="left"))
        if idx >= cum.size:
            return float("inf")
        return float(idx)


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def binomial_sigma(p: float, trials: int) -> float:
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / trials))


def merge_small_cells(observed, expected, min_expected: float = 5.0):
    """Pool consecutive cells until every pooled cell expects >= ``min_expected``.

    A short trailing group is folded into the previous one.
    """
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    obs_out, exp_out = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if obs_out:
            obs_out[-1] += o_acc
            exp_out[-1] += e_acc
        else:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
    return np.array(obs_out), np.array(exp_out)


def chisquare_uniform(counts, min_expected: float = 5.0):
    """Raw (no Yates) chi-square test of ``counts`` against the uniform law.

    Returns ``(chi2, dof, pvalue)``.  With one cell (or after pooling to one
    cell) the test is vacuous and returns ``(0, 0, 1)``.
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if counts.size == 0 or total == 0:
        return 0.0, 0, 1.0
    expected = np.full(counts.size, total / counts.size)
    obs, exp = merge_small_cells(counts, expected, min_expected)
    if obs.size < 2:
        return 0.0, 0, 1.0
    chi2, pval = _sps.chisquare(obs, exp)
    return float(chi2), int(obs.size - 1), float(pval)


def chisquare_law(counts, probs, min_expected: float = 5.0):
    """Chi-square goodness of fit of ``counts`` against probabilities ``probs``."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    keep = probs > 0
    if np.any(counts[~keep] > 0):
        return float("inf"), int(keep.sum() - 1), 0.0
    counts, probs = counts[keep], probs[keep]
    expected = probs / probs.sum() * counts.sum()
    obs, exp = merge_small_cells(counts, expected, min_expected)
    if obs.size < 2:
        return 0.0, 0, 1.0
    chi2, pval = _sps.chisquare(obs, exp)
    return float(chi2), int(obs.size - 1), float(pval)


def family_z_threshold(m: int, sigmas: float = 3.0) -> float:
    """Per-test |z| cutoff keeping the family-wise false alarm at the ``sigmas`` level.

    Bonferroni over ``m`` two-sided tests; reduces to ``sigmas`` when m == 1.
    """
    alpha = 2.0 * _sps.norm.sf(sigmas)
    return float(_sps.norm.isf(alpha / (2.0 * max(m, 1))))
