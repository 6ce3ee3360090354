"""The Markov chain on Pauli strings induced by one random two-qubit gate.

A step picks an ordered pair of distinct sites uniformly.  If both sites
carry the identity nothing happens; otherwise the pair is replaced by one of
the 15 nonzero two-site labels, uniformly.  The chain splits as
``Q = 2/5 Rt + 3/5 Qt`` where ``Rt`` keeps the weight (it swaps the pair and
rerandomizes nonzero symbols) and ``Qt`` is the weight-changing part; the two
pieces commute.

Exact matrices are assembled from integer counts over a common denominator
so identities can be checked without rounding.  Samplers act on ``uint64``
arrays of packed strings (see :mod:`rqclab.pauli`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
import scipy.sparse as sp

from rqclab.errors import CapacityError, DomainError
from rqclab.pauli import (
    PauliString,
    packed_to_str,
    set_pair,
    site_symbols,
    weights_packed,
)
from rqclab.stats import chisquare_uniform, run_blocks

MAX_MATRIX_SITES = 6
MAX_SHELL_SITES = 10

# Local rules: source pair label -> {target pair label: count}, over a local denominator.
# A pair label is a + 4 b for symbols a (site i) and b (site j).
_NONZERO = [lab for lab in range(16) if lab]
_WEIGHT1 = [lab for lab in range(16) if (lab & 3 == 0) != (lab >> 2 == 0)]
_WEIGHT2 = [lab for lab in range(16) if lab & 3 and lab >> 2]


def _pair_weight(lab: int) -> int:
    return (lab & 3 != 0) + (lab >> 2 != 0)


def _rule_q(lab):
    if lab == 0:
        return {0: 15}
    return {x: 1 for x in _NONZERO}


def _rule_r_tilde(lab):
    w = _pair_weight(lab)
    if w == 0:
        return {0: 18}
    if w == 1:
        return {x: 3 for x in _WEIGHT1}
    return {x: 2 for x in _WEIGHT2}


def _rule_q_tilde(lab):
    w = _pair_weight(lab)
    if w == 0:
        return {0: 27}
    if w == 1:
        return {x: 3 for x in _WEIGHT2}
    out = {x: 3 for x in _WEIGHT1}
    out.update({x: 1 for x in _WEIGHT2})
    return out


_RULES = {"q": (_rule_q, 15), "r_tilde": (_rule_r_tilde, 18), "q_tilde": (_rule_q_tilde, 27)}


@dataclass(frozen=True)
class ExactMatrix:
    """Sparse nonnegative integer matrix over a positive integer denominator."""

    counts: sp.csr_matrix
    denom: int

    @property
    def shape(self):
        return self.counts.shape

    def to_float(self) -> sp.csr_matrix:
        return (self.counts.astype(float) / self.denom).tocsr()

    def entry(self, i: int, j: int) -> Fraction:
        return Fraction(int(self.counts[i, j]), self.denom)

    def row(self, i: int) -> np.ndarray:
        return self.counts.getrow(i).toarray().ravel() / self.denom

    def __add__(self, other: "ExactMatrix") -> "ExactMatrix":
        d = math.lcm(self.denom, other.denom)
        c = self.counts * (d // self.denom) + other.counts * (d // other.denom)
        return ExactMatrix(c.tocsr(), d)

    def __sub__(self, other: "ExactMatrix") -> "ExactMatrix":
        d = math.lcm(self.denom, other.denom)
        c = self.counts * (d // self.denom) - other.counts * (d // other.denom)
        return ExactMatrix(c.tocsr(), d)

    def scale(self, f) -> "ExactMatrix":
        f = Fraction(f)
        return ExactMatrix((self.counts * f.numerator).tocsr(), self.denom * f.denominator)

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        return ExactMatrix((self.counts @ other.counts).tocsr(), self.denom * other.denom)

    def equals(self, other: "ExactMatrix") -> bool:
        diff = self.counts * other.denom - other.counts * self.denom
        return diff.count_nonzero() == 0

    def max_abs(self) -> float:
        if self.counts.nnz == 0:
            return 0.0
        return float(abs(self.counts).max()) / self.denom


@dataclass(frozen=True)
class QMatrix:
    """Exact one-step transition matrix of the Pauli-string chain."""

    n: int
    exact: ExactMatrix

    @property
    def matrix(self) -> sp.csr_matrix:
        return self.exact.to_float()

    def row(self, mu) -> np.ndarray:
        return self.exact.row(_bits(mu))

    def power_row(self, mu, t: int) -> np.ndarray:
        """Row ``Q^t(mu, .)`` in floating point."""
        v = np.zeros(4**self.n)
        v[_bits(mu)] = 1.0
        mt = self.matrix.T.tocsr()
        for _ in range(t):
            v = mt @ v
        return v


def _bits(mu) -> int:
    return mu.bits if isinstance(mu, PauliString) else int(mu)


def _assemble(n: int, kind: str) -> ExactMatrix:
    if n < 2:
        raise DomainError(f"need n >= 2, got {n}")
    if n > MAX_MATRIX_SITES:
        raise CapacityError(f"exact string-chain matrices guarded at n <= {MAX_MATRIX_SITES}, got n={n}")
    rule, local_denom = _RULES[kind]
    states = np.arange(4**n, dtype=np.uint64)
    rows, cols, vals = [], [], []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ii = np.full(states.size, i)
            jj = np.full(states.size, j)
            lab = site_symbols(states, ii) + 4 * site_symbols(states, jj)
            for src in range(16):
                sel = states[lab == src]
                if sel.size == 0:
                    continue
                for dst, c in rule(src).items():
                    tgt = set_pair(sel, i, j, dst & 3, dst >> 2)
                    rows.append(sel)
                    cols.append(tgt)
                    vals.append(np.full(sel.size, c, dtype=np.int64))
    size = 4**n
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows).astype(np.int64), np.concatenate(cols).astype(np.int64))),
        shape=(size, size),
    ).tocsr()
    mat.sum_duplicates()
    return ExactMatrix(mat, local_denom * n * (n - 1))


def build_q_matrix(n: int) -> QMatrix:
    return QMatrix(n, _assemble(n, "q"))


def build_r_tilde(n: int) -> ExactMatrix:
    return _assemble(n, "r_tilde")


def build_q_tilde(n: int) -> ExactMatrix:
    return _assemble(n, "q_tilde")


def verify_commutation(n: int) -> float:
    """Largest entry of ``Rt Qt - Qt Rt`` (computed exactly, reported as float)."""
    if n > 4:
        raise CapacityError(f"commutation check guarded at n <= 4, got n={n}")
    r, q = build_r_tilde(n), build_q_tilde(n)
    return (r @ q - q @ r).max_abs()


def weight_marginal(qm: QMatrix) -> dict[int, list[Fraction]]:
    """For each packed ``mu``: exact mass ``sum_{|nu| = k} Q(mu, nu)`` for k = 0..n."""
    n = qm.n
    w = weights_packed(np.arange(4**n, dtype=np.uint64), n)
    counts = qm.exact.counts.tocoo()
    acc = np.zeros((4**n, n + 1), dtype=np.int64)
    np.add.at(acc, (counts.row, w[counts.col]), counts.data)
    return {mu: [Fraction(int(c), qm.exact.denom) for c in acc[mu]] for mu in range(4**n)}


def q_matrix_triplets(qm: QMatrix):
    """``(mu, nu, prob)`` rows in textual Pauli form."""
    coo = qm.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    for k in order:
        yield packed_to_str(coo.row[k], qm.n), packed_to_str(coo.col[k], qm.n), float(coo.data[k])


# --- samplers --------------------------------------------------------------

def _ordered_pairs(n: int, size: int, rng: np.random.Generator):
    i = rng.integers(0, n, size)
    j = rng.integers(0, n - 1, size)
    j = j + (j >= i)
    return i, j


def q_step_many(states: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    states = np.asarray(states, dtype=np.uint64)
    i, j = _ordered_pairs(n, states.size, rng)
    a, b = site_symbols(states, i), site_symbols(states, j)
    lab = rng.integers(1, 16, states.size)
    new = set_pair(states, i, j, lab & 3, lab >> 2)
    return np.where((a | b) != 0, new, states)


def r_tilde_step_many(states: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    states = np.asarray(states, dtype=np.uint64)
    i, j = _ordered_pairs(n, states.size, rng)
    a, b = site_symbols(states, i), site_symbols(states, j)
    w = (a != 0).astype(int) + (b != 0)
    sym = rng.integers(1, 4, (2, states.size))
    side = rng.integers(0, 2, states.size)
    na = np.where(w == 2, sym[0], np.where(side == 0, sym[0], 0))
    nb = np.where(w == 2, sym[1], np.where(side == 1, sym[0], 0))
    return np.where(w > 0, set_pair(states, i, j, na, nb), states)


def q_tilde_step_many(states: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    states = np.asarray(states, dtype=np.uint64)
    i, j = _ordered_pairs(n, states.size, rng)
    a, b = site_symbols(states, i), site_symbols(states, j)
    w = (a != 0).astype(int) + (b != 0)
    sym = rng.integers(1, 4, (2, states.size))
    side = rng.integers(0, 2, states.size)
    drop = rng.random(states.size) < 2 / 3
    to_one = (w == 2) & drop
    na = np.where(to_one, np.where(side == 0, sym[0], 0), sym[0])
    nb = np.where(to_one, np.where(side == 1, sym[0], 0), sym[1])
    return np.where(w > 0, set_pair(states, i, j, na, nb), states)


def _scalar(step_many: Callable) -> Callable:
    def step(p: PauliString, rng: np.random.Generator) -> PauliString:
        if p.n < 2:
            raise DomainError("need n >= 2")
        out = step_many(np.array([p.bits], dtype=np.uint64), p.n, rng)
        return PauliString(p.n, int(out[0]))

    step.__name__ = step_many.__name__.replace("_many", "")
    step.__doc__ = f"Single-string form of :func:`{step_many.__name__}`."
    return step


q_step = _scalar(q_step_many)
r_tilde_step = _scalar(r_tilde_step_many)
q_tilde_step = _scalar(q_tilde_step_many)


def run_q_many(states: np.ndarray, n: int, t: int, rng: np.random.Generator) -> np.ndarray:
    for _ in range(t):
        states = q_step_many(states, n, rng)
    return states


def two_phase_sample_many(states: np.ndarray, n: int, t: int, rng: np.random.Generator) -> np.ndarray:
    """``Binomial(t, 3/5)`` weight-changing steps, then the rest weight-preserving.

    Same output law as ``t`` steps of the full chain.
    """
    states = np.asarray(states, dtype=np.uint64).copy()
    t1 = rng.binomial(t, 0.6, states.size)
    for s in range(int(t1.max(initial=0))):
        live = t1 > s
        states[live] = q_tilde_step_many(states[live], n, rng)
    t2 = t - t1
    for s in range(int(t2.max(initial=0))):
        live = t2 > s
        states[live] = r_tilde_step_many(states[live], n, rng)
    return states


def two_phase_sample(mu: PauliString, t: int, rng: np.random.Generator) -> PauliString:
    if t < 0:
        raise DomainError("t must be nonnegative")
    out = two_phase_sample_many(np.array([mu.bits], dtype=np.uint64), mu.n, t, rng)
    return PauliString(mu.n, int(out[0]))


# --- support-intersection chain -------------------------------------------

@dataclass(frozen=True)
class IntersectionChain:
    """Overlap size between a moving weight-``k`` support and a fixed one."""

    n: int
    k: int
    current: int

    def __post_init__(self):
        if not 0 <= self.k <= self.n:
            raise DomainError(f"weight {self.k} outside 0..{self.n}")
        if not max(0, 2 * self.k - self.n) <= self.current <= self.k:
            raise DomainError(
                f"intersection {self.current} outside [{max(0, 2 * self.k - self.n)}, {self.k}]"
            )

    def probabilities(self) -> tuple[float, float]:
        """``(p_up, p_down)`` from the current state."""
        n, k, i = self.n, self.k, self.current
        denom = n * (n - 1)
        return (k - i) ** 2 / denom, i * (n - 2 * k + i) / denom


def intersection_step(state: IntersectionChain, rng: np.random.Generator, u: float | None = None) -> IntersectionChain:
    p_up, p_down = state.probabilities()
    if not (0 <= p_up <= 1 and 0 <= p_down <= 1 and p_up + p_down <= 1):
        raise RuntimeError(f"invalid intersection-chain probabilities {p_up}, {p_down}")
    u = rng.random() if u is None else u
    if u < p_up:
        return IntersectionChain(state.n, state.k, state.current + 1)
    if u < p_up + p_down:
        return IntersectionChain(state.n, state.k, state.current - 1)
    return state


def run_intersection(state: IntersectionChain, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Occupation counts over ``0..k`` along one long trajectory."""
    visits = np.zeros(state.k + 1, dtype=np.int64)
    for u in rng.random(steps):
        state = intersection_step(state, rng, u)
        visits[state.current] += 1
    return visits


def hypergeometric_law(n: int, k: int) -> np.ndarray:
    """``C(k, j) C(n - k, k - j) / C(n, k)`` for ``j = 0..k``."""
    total = math.comb(n, k)
    return np.array([math.comb(k, j) * math.comb(n - k, k - j) / total for j in range(k + 1)])


# --- shell equidistribution -----------------------------------------------

@dataclass
class ShellReport:
    k: int
    shell_size: int
    observed: int
    chi2: float
    dof: int
    pvalue: float


def final_state_counts(mu: PauliString, t: int, trials: int, seed: int = 0, threads: int = 1) -> np.ndarray:
    """Histogram over packed strings of ``t``-step chain endpoints from ``mu``."""
    n = mu.n
    if n > MAX_SHELL_SITES:
        raise CapacityError(f"shell bookkeeping guarded at n <= {MAX_SHELL_SITES}, got n={n}")

    def block(size, rng):
        states = run_q_many(np.full(size, mu.bits, dtype=np.uint64), n, t, rng)
        return np.bincount(states.astype(np.int64), minlength=4**n)

    return run_blocks(block, trials, seed, threads=threads, merge=np.add)


def shell_reports(counts: np.ndarray, n: int, min_expected: float = 5.0) -> list[ShellReport]:
    """Chi-square of each weight shell's conditional counts against uniform."""
    w = weights_packed(np.arange(4**n, dtype=np.uint64), n)
    out = []
    for k in range(1, n + 1):
        shell = counts[w == k]
        chi2, dof, p = chisquare_uniform(shell, min_expected)
        out.append(ShellReport(k, int(shell.size), int(shell.sum()), chi2, dof, p))
    return out


def empirical_uniformity(mu: PauliString, t: int, trials: int, seed: int = 0, threads: int = 1) -> list[ShellReport]:
    return shell_reports(final_state_counts(mu, t, trials, seed, threads), mu.n)
