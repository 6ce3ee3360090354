"""Gambler's ruin with site-dependent forward probabilities.

The walk lives on ``-1, 0, ..., a``.  At site ``i >= 1`` it steps forward
with probability ``p_plus[i - 1]``; at site 0 with probability ``p_minus``.
Both ends absorb.  We want the probability of reaching ``-1`` before ``a``
from site 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rqclab.errors import DomainError
from rqclab.stats import run_blocks


@dataclass(frozen=True)
class RuinInstance:
    a: int
    p_minus: float
    p_plus: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "p_plus", tuple(float(p) for p in self.p_plus))
        if self.a < 1:
            raise DomainError(f"right boundary must be positive, got a={self.a}")
        if len(self.p_plus) != self.a - 1:
            raise DomainError(f"need {self.a - 1} forward probabilities, got {len(self.p_plus)}")
        for p in (self.p_minus, *self.p_plus):
            if not 0 < p < 1:
                raise DomainError(f"forward probability {p} outside (0, 1)")

    @classmethod
    def constant(cls, a: int, p: float, p_minus: float | None = None) -> "RuinInstance":
        return cls(a, p if p_minus is None else p_minus, (p,) * (a - 1))

    def forward(self) -> np.ndarray:
        """Forward probability indexed by site ``0..a-1``."""
        return np.array((self.p_minus, *self.p_plus))

    def check_drift(self):
        bad = [p for p in (self.p_minus, *self.p_plus) if p <= 0.5]
        if bad:
            raise DomainError(f"closed form needs every forward probability > 1/2, got {bad[0]}")


def odds(p: float) -> float:
    return p / (1.0 - p)


def ruin_probability(inst: RuinInstance) -> float:
    """Exact probability of hitting ``-1`` before ``a`` from site 0.

    Evaluates ``1 / (1 + alpha_minus * prod / (1 + sum of suffix products))``
    through the ratio ``r_i = d_i / (d_i + ... + d_a)`` of successive gaps
    ``d_i = P_{i-1} - P_i``, which stays in (0, 1] and never overflows.
    """
    inst.check_drift()
    r = 1.0
    for p in reversed(inst.p_plus):
        x = odds(p) * r
        r = x / (x + 1.0)
    return 1.0 / (1.0 + odds(inst.p_minus) * r)


def constant_odds_bound(alpha_minus: float, alpha_plus: float) -> float:
    """Upper bound ``1 / (1 + alpha_minus (1 - 1/alpha_plus))`` valid for every ``a``."""
    return 1.0 / (1.0 + alpha_minus * (1.0 - 1.0 / alpha_plus))


def absorption_vector(inst: RuinInstance) -> np.ndarray:
    """``P_{-1}, P_0, ..., P_a`` from a direct linear solve of the first-step equations."""
    a = inst.a
    fwd = inst.forward()
    m = np.zeros((a, a))
    rhs = np.zeros(a)
    for i in range(a):
        m[i, i] = 1.0
        if i + 1 < a:
            m[i, i + 1] = -fwd[i]
        if i >= 1:
            m[i, i - 1] = -(1.0 - fwd[i])
        else:
            rhs[i] = 1.0 - fwd[0]
    try:
        interior = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("singular absorption system") from exc
    return np.concatenate(([1.0], interior, [0.0]))


def ruin_exact_linear(inst: RuinInstance) -> float:
    """Same quantity as :func:`ruin_probability`, any forward probability in (0, 1)."""
    return float(absorption_vector(inst)[1])


def _ruin_block(fwd: np.ndarray, a: int, size: int, rng: np.random.Generator) -> int:
    pos = np.zeros(size, dtype=np.int64)
    ruined = 0
    while pos.size:
        pos = pos + np.where(rng.random(pos.size) < fwd[pos], 1, -1)
        lo = pos < 0
        ruined += int(lo.sum())
        pos = pos[~lo & (pos < a)]
    return ruined


def ruin_mc(inst: RuinInstance, trials: int, seed: int = 0, threads: int = 1) -> tuple[float, float]:
    """Monte Carlo estimate of the ruin probability and its standard error."""
    fwd = inst.forward()
    hits = run_blocks(
        lambda size, rng: _ruin_block(fwd, inst.a, size, rng), trials, seed, threads=threads, merge=int.__add__
    )
    p = hits / trials
    return p, float(np.sqrt(p * (1 - p) / trials))


def random_instance(rng: np.random.Generator, max_a: int = 30, low: float = 0.5) -> RuinInstance:
    """Random instance with forward probabilities uniform in ``(low, 1)``."""
    a = int(rng.integers(1, max_a + 1))
    ps = rng.uniform(low, 1.0, size=a)
    ps = np.clip(ps, np.nextafter(low, 1.0), np.nextafter(1.0, 0.0))
    return RuinInstance(a, float(ps[0]), tuple(ps[1:].tolist()))

