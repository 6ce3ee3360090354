"""Random two-qubit circuits, their greedy leveling, and qubit coverage.

Qubits are 0-based.  A gate is an unordered pair ``(i, j)`` with ``i < j``;
sampled pairs are uniform over the ``C(n, 2)`` choices and independent.

Greedy leveling walks the gate list once: a gate joins the current level
unless it touches a qubit already used there, in which case a new level is
opened.  Depth is the number of levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rqclab.errors import DomainError, RejectionCapError
from rqclab.stats import binomial_sigma, run_blocks

DEFAULT_REJECTION_CAP = 10_000


@dataclass(frozen=True)
class Circuit:
    n: int
    pairs: np.ndarray = field(repr=False)
    labels: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if self.n < 2 and pairs.size:
            raise DomainError("gates need at least two qubits")
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= self.n:
                raise DomainError(f"qubit index outside 0..{self.n - 1}")
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise DomainError("a gate must act on two distinct qubits")
        pairs = np.sort(pairs, axis=1)
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)
        if self.labels is not None and len(self.labels) != len(pairs):
            raise DomainError("one label per gate required")

    @classmethod
    def from_gates(cls, n: int, gates: Sequence[Sequence[int]], labels=None) -> "Circuit":
        return cls(n, np.array(gates, dtype=np.int64).reshape(-1, 2), labels)

    def __len__(self) -> int:
        return len(self.pairs)

    def gates(self) -> list[tuple[int, int]]:
        return [tuple(p) for p in self.pairs.tolist()]


@dataclass(frozen=True)
class Levels:
    """Consecutive runs of gate indices; gates inside a run touch disjoint qubits."""

    levels: tuple[tuple[int, ...], ...]

    @property
    def depth(self) -> int:
        return len(self.levels)

    def gate_pairs(self, circuit: Circuit) -> list[list[tuple[int, int]]]:
        return [[tuple(circuit.pairs[g].tolist()) for g in lvl] for lvl in self.levels]


def parallelize(c: Circuit) -> Levels:
    levels: list[tuple[int, ...]] = []
    current: list[int] = []
    used: set[int] = set()
    for g, (i, j) in enumerate(c.pairs.tolist()):
        if i in used or j in used:
            levels.append(tuple(current))
            current, used = [], set()
        current.append(g)
        used.update((i, j))
    if current:
        levels.append(tuple(current))
    return Levels(tuple(levels))


def sample_pairs(n: int, shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform unordered pairs, sorted, with trailing axis of length 2."""
    if n < 2:
        raise DomainError(f"need n >= 2, got {n}")
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    i = rng.integers(0, n, shape)
    j = rng.integers(0, n - 1, shape)
    j = j + (j >= i)
    return np.stack([np.minimum(i, j), np.maximum(i, j)], axis=-1)


def sample_sequential(n: int, t: int, rng: np.random.Generator) -> Circuit:
    if t < 0:
        raise DomainError("t must be nonnegative")
    return Circuit(n, sample_pairs(n, t, rng))


def batch_depths(pairs: np.ndarray, n: int) -> np.ndarray:
    """Greedy-leveling depth of each circuit in a ``(batch, t, 2)`` array."""
    batch, t = pairs.shape[:2]
    if t == 0:
        return np.zeros(batch, dtype=np.int64)
    rows = np.arange(batch)
    stamp = np.full((batch, n), -1, dtype=np.int64)
    level = np.zeros(batch, dtype=np.int64)
    for g in range(t):
        i, j = pairs[:, g, 0], pairs[:, g, 1]
        level += (stamp[rows, i] == level) | (stamp[rows, j] == level)
        stamp[rows, i] = level
        stamp[rows, j] = level
    return level + 1


def min_depth(n: int, t: int) -> int:
    """Counting lower bound ``ceil(t / floor(n/2))`` on any leveling's depth."""
    return math.ceil(t / (n // 2)) if t else 0


@dataclass
class RQCSample:
    circuit: Circuit
    levels: Levels
    rejections: int


def sample_rqc_td(
    n: int, t: int, d: int, rng: np.random.Generator, cap: int = DEFAULT_REJECTION_CAP
) -> RQCSample:
    """Sequential circuits are drawn until one levels to depth ``<= d``."""
    if d < min_depth(n, t):
        raise DomainError(f"depth {d} below the counting bound {min_depth(n, t)} for n={n}, t={t}")
    for attempt in range(cap):
        c = sample_sequential(n, t, rng)
        lv = parallelize(c)
        if lv.depth <= d:
            return RQCSample(c, lv, attempt)
    raise RejectionCapError(f"no circuit of depth <= {d} in {cap} attempts (n={n}, t={t})", cap)


def depth_samples(n: int, t: int, trials: int, seed: int = 0, threads: int = 1, block_size: int = 1024) -> np.ndarray:
    """Greedy depths of ``trials`` independent ``t``-gate circuits."""

    def block(size, rng):
        return batch_depths(sample_pairs(n, (size, t), rng), n)

    return np.concatenate(run_blocks(block, trials, seed, threads=threads, block_size=block_size))


def chain_bound(n: int, k: int) -> float:
    """``min(1, (2/n)^(k-1) k!)``."""
    return min(1.0, (2.0 / n) ** (k - 1) * math.factorial(k))


@dataclass
class ChainReport:
    k: int
    trials: int
    hits: int
    bound: float

    @property
    def frequency(self) -> float:
        return self.hits / self.trials

    @property
    def sigma(self) -> float:
        return binomial_sigma(self.bound, self.trials)

    @property
    def passed(self) -> bool:
        return self.frequency <= self.bound + 3 * self.sigma


def conflict_chain_frequency(n: int, k: int, trials: int, seed: int = 0) -> ChainReport:
    """How often ``k`` random gates level to depth ``k`` (each overlaps its predecessor)."""
    if k < 1:
        raise DomainError("k must be positive")

    def block(size, rng):
        g = sample_pairs(n, (size, k), rng)
        ok = np.ones(size, dtype=bool)
        for m in range(k - 1):
            a, b = g[:, m], g[:, m + 1]
            ok &= (a[:, :1] == b).any(axis=1) | (a[:, 1:] == b).any(axis=1)
        return int(ok.sum())

    hits = sum(run_blocks(block, trials, seed))
    return ChainReport(k, trials, hits, chain_bound(n, k))


@dataclass
class DepthTail:
    n: int
    t: int
    depths: np.ndarray = field(repr=False)
    chains: list[ChainReport] = field(default_factory=list)

    def histogram(self) -> np.ndarray:
        return np.bincount(self.depths)

    def fraction_at_most(self, d: int) -> float:
        return float(np.mean(self.depths <= d))


def depth_tail_mc(
    n: int, t: int, trials: int, seed: int = 0, k_max: int = 12, chain_trials: int | None = None, threads: int = 1
) -> DepthTail:
    depths = depth_samples(n, t, trials, seed, threads)
    chain_trials = trials if chain_trials is None else chain_trials
    chains = [conflict_chain_frequency(n, k, chain_trials, seed + k) for k in range(2, k_max + 1)]
    return DepthTail(n, t, depths, chains)


def coverage_bound(n: int, t: int) -> float:
    """Union bound ``n (1 - 2/n)^t`` on the chance that some qubit is never touched."""
    return n * (1.0 - 2.0 / n) ** t


@dataclass
class CoverageReport:
    n: int
    t: int
    trials: int
    covered: int

    @property
    def frequency(self) -> float:
        return self.covered / self.trials

    @property
    def uncovered_frequency(self) -> float:
        return 1.0 - self.frequency

    @property
    def stderr(self) -> float:
        return binomial_sigma(self.frequency, self.trials)

    @property
    def bound(self) -> float:
        return coverage_bound(self.n, self.t)


def coverage_probability(n: int, t: int, trials: int, seed: int = 0, threads: int = 1) -> CoverageReport:
    """Frequency with which every qubit is touched by at least one of ``t`` random gates."""

    def block(size, rng):
        touched = np.zeros((size, n), dtype=bool)
        rows = np.arange(size)
        for _ in range(t):
            p = sample_pairs(n, size, rng)
            touched[rows, p[:, 0]] = True
            touched[rows, p[:, 1]] = True
        return int(touched.all(axis=1).sum())

    covered = sum(run_blocks(block, trials, seed, threads=threads, block_size=16384))
    return CoverageReport(n, t, trials, covered)
