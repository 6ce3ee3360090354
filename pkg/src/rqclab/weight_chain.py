"""The birth-death chain on Pauli weights.

From weight ``l`` on ``n`` sites one step moves

* up with probability ``6 l (n - l) / (5 n (n - 1))``,
* down with probability ``2 l (l - 1) / (5 n (n - 1))``,
* and otherwise stays.

Weight 0 is absorbing and is never reached from a nonzero weight.  The
stationary law on ``1..n`` is ``3^k C(n, k) / (4^n - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp

from rqclab.errors import DomainError
from rqclab.stats import BLOCK_SIZE, TrajectoryStats, run_blocks


def exact_row(n: int, ell: int) -> tuple[Fraction, Fraction, Fraction]:
    """``(down, stay, up)`` at weight ``ell`` as exact fractions."""
    denom = 5 * n * (n - 1)
    up = Fraction(6 * ell * (n - ell), denom)
    down = Fraction(2 * ell * (ell - 1), denom)
    return down, 1 - up - down, up


@dataclass(frozen=True)
class WeightChain:
    n: int
    rows: tuple = field(repr=False)
    down: np.ndarray = field(repr=False)
    stay: np.ndarray = field(repr=False)
    up: np.ndarray = field(repr=False)

    def row(self, ell: int) -> tuple[float, float, float]:
        return float(self.down[ell]), float(self.stay[ell]), float(self.up[ell])

    def dense(self) -> np.ndarray:
        """Full ``(n+1) x (n+1)`` transition matrix, for small-n cross checks."""
        m = np.diag(self.stay)
        idx = np.arange(self.n)
        m[idx, idx + 1] = self.up[:-1]
        m[idx + 1, idx] = self.down[1:]
        return m


def build(n: int) -> WeightChain:
    if n < 2:
        raise DomainError(f"weight chain needs n >= 2, got {n}")
    rows = tuple(exact_row(n, ell) for ell in range(n + 1))
    down = np.array([float(r[0]) for r in rows])
    stay = np.array([float(r[1]) for r in rows])
    up = np.array([float(r[2]) for r in rows])
    for a in (down, stay, up):
        a.setflags(write=False)
    return WeightChain(n, rows, down, stay, up)


def log_stationary(n: int) -> np.ndarray:
    """Natural log of the stationary law on weights ``1..n`` (index ``k - 1``)."""
    k = np.arange(1, n + 1)
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    log_norm = n * math.log(4.0) + math.log1p(-(4.0**-n))
    return k * math.log(3.0) + log_binom - log_norm


def stationary(n: int) -> np.ndarray:
    """Stationary law ``3^k C(n,k)/(4^n - 1)`` on weights ``1..n`` (index ``k - 1``)."""
    if n < 2:
        raise DomainError(f"weight chain needs n >= 2, got {n}")
    pi = np.exp(log_stationary(n))
    return pi / pi.sum()


def _step_vector(chain: WeightChain, v: np.ndarray) -> np.ndarray:
    out = v * chain.stay
    out[1:] += v[:-1] * chain.up[:-1]
    out[:-1] += v[1:] * chain.down[1:]
    return out


def evolve_exact(n: int, ell: int, t: int, chain: WeightChain | None = None) -> np.ndarray:
    """Row ``P^t(ell, .)`` over weights ``0..n`` by ``t`` tridiagonal products."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    chain = chain or build(n)
    if not 0 <= ell <= n:
        raise DomainError(f"start weight {ell} outside 0..{n}")
    v = np.zeros(n + 1)
    v[ell] = 1.0
    for _ in range(t):
        v = _step_vector(chain, v)
    return v


def evolve_log(n: int, ell: int, t: int, chain: WeightChain | None = None) -> np.ndarray:
    """Natural log of ``P^t(ell, .)``, immune to underflow at large ``n``."""
    chain = chain or build(n)
    with np.errstate(divide="ignore"):
        ls, lu, ld = np.log(chain.stay), np.log(chain.up), np.log(chain.down)
    v = np.full(n + 1, -np.inf)
    v[ell] = 0.0
    for _ in range(t):
        terms = np.full((3, n + 1), -np.inf)
        terms[0] = v + ls
        terms[1, 1:] = v[:-1] + lu[:-1]
        terms[2, :-1] = v[1:] + ld[1:]
        v = logsumexp(terms, axis=0)
    return v


def step(chain: WeightChain, ell: int, rng: np.random.Generator) -> int:
    u = rng.random()
    if u < chain.up[ell]:
        return ell + 1
    if u < chain.up[ell] + chain.down[ell]:
        return ell - 1
    return ell


def step_many(chain: WeightChain, ells: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(ells.shape)
    up = chain.up[ells]
    move_up = u < up
    move_down = ~move_up & (u < up + chain.down[ells])
    return ells + move_up - move_down


def run_trajectory(chain: WeightChain, ell: int, t: int, rng: np.random.Generator, path: bool = False):
    """Final weight after ``t`` steps; with ``path=True`` also the visited weights."""
    if not 0 <= ell <= chain.n:
        raise DomainError(f"start weight {ell} outside 0..{chain.n}")
    visited = [ell]
    for _ in range(t):
        ell = step(chain, ell, rng)
        if path:
            visited.append(ell)
    return (ell, visited) if path else ell


def run_trajectories(chain: WeightChain, ell: int, t: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Final weights of ``size`` independent trajectories."""
    ells = np.full(size, ell, dtype=np.int64)
    for _ in range(t):
        ells = step_many(chain, ells, rng)
    return ells


def move_probability(chain: WeightChain, ell: int) -> float:
    return float(chain.up[ell] + chain.down[ell])


def accelerated_step(chain: WeightChain, ell: int, rng: np.random.Generator) -> tuple[int, int]:
    """One move of the jump chain and the number of idle steps before it."""
    p_move = move_probability(chain, ell)
    if p_move == 0.0:
        raise DomainError(f"weight {ell} never moves")
    wait = int(rng.geometric(p_move)) - 1
    nxt = ell + 1 if rng.random() * p_move < chain.up[ell] else ell - 1
    return nxt, wait


# --- hitting times ---------------------------------------------------------

def default_deadline(n: int) -> int:
    return int(math.ceil(50 * n * math.log2(n) ** 2))


@dataclass
class HittingStats:
    start: int
    target: int
    t_max: int
    stats: TrajectoryStats

    @property
    def trials(self) -> int:
        return self.stats.trials

    @property
    def censored(self) -> int:
        return self.stats.censored

    @property
    def seed(self):
        return self.stats.seed

    @property
    def histogram(self) -> np.ndarray:
        return self.stats.histogram

    @property
    def mean(self) -> float:
        """Mean over uncensored trials."""
        return self.stats.mean

    def quantile(self, q: float) -> float:
        return self.stats.quantile(q)

    def merge(self, other: "HittingStats") -> "HittingStats":
        if (self.start, self.target, self.t_max) != (other.start, other.target, other.t_max):
            raise ValueError("hitting statistics for different problems")
        return HittingStats(self.start, self.target, self.t_max, self.stats.merge(other.stats))


def _check_hitting(chain: WeightChain, start: int, target: int):
    if not 1 <= target <= chain.n:
        raise DomainError(f"target {target} unreachable on weights 1..{chain.n}")
    if not 1 <= start <= chain.n:
        raise DomainError(f"start {start} outside 1..{chain.n}")


def _hit_block(chain, start, target, t_max, size, rng):
    if start == target:
        return np.zeros(size, dtype=np.int64), 0
    upward = start < target
    times = np.full(size, -1, dtype=np.int64)
    active = np.arange(size)
    ells = np.full(size, start, dtype=np.int64)
    t = 0
    while active.size and t < t_max:
        t += 1
        ells = step_many(chain, ells, rng)
        done = ells >= target if upward else ells <= target
        if done.any():
            times[active[done]] = t
            keep = ~done
            active, ells = active[keep], ells[keep]
    return times[times >= 0], int(active.size)


def hitting_time_mc(
    chain: WeightChain,
    start: int,
    target: int,
    trials: int,
    t_max: int | None = None,
    seed: int = 0,
    threads: int = 1,
) -> HittingStats:
    """Monte Carlo law of ``min{t >= 1 : X_t >= target}`` (``<= target`` when starting above).

    ``start == target`` is recorded as time 0.  Trials still running at
    ``t_max`` are counted as censored.
    """
    _check_hitting(chain, start, target)
    t_max = default_deadline(chain.n) if t_max is None else t_max

    def block(size, rng):
        times, cens = _hit_block(chain, start, target, t_max, size, rng)
        return TrajectoryStats.from_samples(times, censored=cens, seed=seed)

    stats = run_blocks(block, trials, seed, threads=threads, merge=TrajectoryStats.merge)
    return HittingStats(start, target, t_max, stats)


def hitting_times_accelerated(
    chain: WeightChain, start: int, target: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Hitting times assembled from jump-chain moves plus geometric idle waits."""
    _check_hitting(chain, start, target)
    if start == target:
        return np.zeros(size, dtype=np.int64)
    upward = start < target
    p_move = chain.up + chain.down
    with np.errstate(invalid="ignore", divide="ignore"):
        p_up_given_move = np.where(p_move > 0, chain.up / p_move, 0.0)
    times = np.zeros(size, dtype=np.int64)
    ells = np.full(size, start, dtype=np.int64)
    active = np.arange(size)
    while active.size:
        p = p_move[ells]
        times[active] += rng.geometric(p)
        ells = ells + np.where(rng.random(ells.size) < p_up_given_move[ells], 1, -1)
        done = ells >= target if upward else ells <= target
        keep = ~done
        active, ells = active[keep], ells[keep]
    return times


# --- reference points and the convergence bound ----------------------------

class ReferencePoints(NamedTuple):
    r_minus: int
    r_plus: int
    drift_ok: bool


def reference_points(n: int, delta: float = 0.05) -> ReferencePoints:
    """``floor((3/4 - delta) n)`` and ``ceil((3/4 + delta) n)`` plus a drift check.

    ``drift_ok`` holds when the up/down ratio ``3 (n - x)/(x - 1)`` is at least
    ``1 + 2 delta`` for every ``x < r_minus`` and the mirrored ratio is at least
    ``1 + 2 delta`` for every ``y > r_plus``.  Boundary states where the
    denominator vanishes count as infinite drift.
    """
    if not 0 < delta < 1 / 16:
        raise DomainError(f"delta must lie in (0, 1/16), got {delta}")
    d = Fraction(delta).limit_denominator(10**9)
    r_minus = math.floor((Fraction(3, 4) - d) * n)
    r_plus = math.ceil((Fraction(3, 4) + d) * n)
    need = 1 + 2 * d
    ok = all(3 * (n - x) >= need * (x - 1) for x in range(2, r_minus))
    ok = ok and all(y - 1 >= need * 3 * (n - y) for y in range(r_plus + 1, n))
    return ReferencePoints(r_minus, r_plus, ok)


@dataclass
class BoundReport:
    k: int
    log_lhs: float
    log_rhs: float
    log_stationary_term: float
    log_slack: float

    @property
    def lhs(self) -> float:
        return math.exp(self.log_lhs)

    @property
    def rhs(self) -> float:
        return math.exp(self.log_rhs)

    @property
    def passed(self) -> bool:
        return self.log_lhs <= self.log_rhs


def _log_binom(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def theorem_bound_sweep(
    n: int,
    ell: int,
    t: int,
    delta: float,
    c_poly: float = 1.0,
    eta: float = 0.5,
    poly_degree: float = 1.0,
) -> list[BoundReport]:
    """Compare ``P^t(ell, k)`` with the convergence bound for every ``k`` in ``1..n``.

    The right-hand side is ``4^(delta n) pi(k) + c_poly / ((3 - eta)^ell C(n, ell) n^poly_degree)``,
    where the constants left open by the asymptotic statement are user
    parameters.  Everything is carried in natural logs.
    """
    log_row = evolve_log(n, ell, t)
    log_pi = log_stationary(n)
    log_slack = (
        math.log(c_poly) - ell * math.log(3 - eta) - _log_binom(n, ell) - poly_degree * math.log(n)
        if c_poly > 0
        else -math.inf
    )
    out = []
    for k in range(1, n + 1):
        first = delta * n * math.log(4.0) + log_pi[k - 1]
        out.append(
            BoundReport(
                k=k,
                log_lhs=float(log_row[k]),
                log_rhs=float(np.logaddexp(first, log_slack)),
                log_stationary_term=float(first),
                log_slack=float(log_slack),
            )
        )
    return out


def check_theorem_bound(n, ell, k, t, delta, c_poly=1.0, eta=0.5, poly_degree=1.0) -> BoundReport:
    if not 1 <= k <= n:
        raise DomainError(f"k={k} outside 1..{n}")
    return theorem_bound_sweep(n, ell, t, delta, c_poly, eta, poly_degree)[k - 1]


# --- binomial and binary-entropy estimates ---------------------------------

def binary_entropy(alpha) -> np.ndarray:
    """Binary entropy in bits, with ``h(0) = h(1) = 0``."""
    a = np.asarray(alpha, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -a * np.log2(a) - (1 - a) * np.log2(1 - a)
    return np.where((a <= 0) | (a >= 1), 0.0, h)


def binomial_estimate_failures(ns=range(10, 201), grid=None) -> dict[str, list]:
    """Counterexamples to four standard binomial / entropy estimates.

    Checked:

    * ``tail``: ``sum_{k <= a n} C(n, k) <= 2^(n h(a))`` for ``a = k/n <= 1/2``;
    * ``central``: ``C(n, a n) >= 2^(n h(a)) / (n + 1)`` for every integer ``a n``;
    * ``continuity``: ``|h(a + d) - h(a)| <= h(d)`` on the grid with ``a + d <= 1``;
    * ``sqrt``: ``h(a) <= 2 sqrt(a (1 - a))`` on the grid.

    An empty list under every key means all checks passed.
    """
    grid = np.round(np.arange(1, 100) / 100, 2) if grid is None else np.asarray(grid)
    fails = {"tail": [], "central": [], "continuity": [], "sqrt": []}
    tol = 1e-12
    for n in ns:
        partial = 0
        for k in range(n + 1):
            c = math.comb(n, k)
            partial += c
            a = k / n
            nh = n * float(binary_entropy(a))
            if 2 * k <= n and math.log2(partial) > nh + tol:
                fails["tail"].append((n, k))
            if math.log2(c) < nh - math.log2(n + 1) - tol:
                fails["central"].append((n, k))
    for a in grid:
        for d in grid:
            if a + d <= 1 + 1e-12:
                lhs = abs(float(binary_entropy(min(a + d, 1.0))) - float(binary_entropy(a)))
                if lhs > float(binary_entropy(d)) + tol:
                    fails["continuity"].append((float(a), float(d)))
        if float(binary_entropy(a)) > 2 * math.sqrt(a * (1 - a)) + tol:
            fails["sqrt"].append(float(a))
    return fails


__all__ = [
    "BLOCK_SIZE",
    "BoundReport",
    "HittingStats",
    "ReferencePoints",
    "WeightChain",
    "accelerated_step",
    "binary_entropy",
    "binomial_estimate_failures",
    "build",
    "check_theorem_bound",
    "evolve_exact",
    "evolve_log",
    "exact_row",
    "hitting_time_mc",
    "hitting_times_accelerated",
    "reference_points",
    "run_trajectories",
    "run_trajectory",
    "stationary",
    "step",
    "theorem_bound_sweep",
]
