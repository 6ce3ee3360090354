"""Bit-packed Pauli strings over the alphabet {0, 1, 2, 3}.

Site ``i`` (0-based) occupies bits ``2i`` and ``2i+1`` of the packed word,
so site 0 sits at the least significant end.  Symbol ``0`` is the identity
and ``1, 2, 3`` are sigma_x, sigma_y, sigma_z.  The textual form lists site 0
first, e.g. ``"1203"``.

Batch helpers at the bottom operate on ``uint64`` arrays of packed strings
(``n <= 32``) and are what the Monte Carlo loops use.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterable, Sequence

import numpy as np

from rqclab.errors import CapacityError, DomainError

MAX_DENSE_SITES = 12
MAX_PACKED_SITES = 32

_LOW = 0x5555555555555555

SIGMA = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def _plane_mask(n: int) -> int:
    return _LOW & ((1 << (2 * n)) - 1)


@dataclass(frozen=True)
class PauliString:
    """An unsigned n-site Pauli label, packed two bits per site."""

    n: int
    bits: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"site count must be positive, got {self.n}")
        if self.bits < 0 or self.bits >> (2 * self.n):
            raise DomainError("packed data has bits beyond the last site")

    @classmethod
    def from_symbols(cls, symbols: Iterable[int]) -> "PauliString":
        symbols = list(symbols)
        bits = 0
        for i, s in enumerate(symbols):
            if s not in (0, 1, 2, 3):
                raise DomainError(f"site {i} has symbol {s!r}, expected 0..3")
            bits |= int(s) << (2 * i)
        return cls(len(symbols), bits)

    @classmethod
    def from_str(cls, text: str) -> "PauliString":
        try:
            return cls.from_symbols(int(c) for c in text)
        except ValueError as exc:
            raise DomainError(f"not a Pauli string: {text!r}") from exc

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0)

    def __getitem__(self, i: int) -> int:
        if not -self.n <= i < self.n:
            raise IndexError(i)
        return (self.bits >> (2 * (i % self.n))) & 3

    def __len__(self) -> int:
        return self.n

    def symbols(self) -> tuple[int, ...]:
        return tuple((self.bits >> (2 * i)) & 3 for i in range(self.n))

    def __str__(self) -> str:
        return "".join(str(s) for s in self.symbols())

    @property
    def weight(self) -> int:
        return weight(self)

    def support(self) -> frozenset[int]:
        return frozenset(i for i, s in enumerate(self.symbols()) if s)


def weight(p: PauliString) -> int:
    """Number of non-identity sites."""
    return ((p.bits | (p.bits >> 1)) & _plane_mask(p.n)).bit_count()


def sample_uniform_weight(n: int, ell: int, rng: np.random.Generator) -> PauliString:
    """Uniform draw among the ``3**ell * C(n, ell)`` strings of weight ``ell``."""
    if not 0 <= ell <= n:
        raise DomainError(f"weight {ell} outside 0..{n}")
    sites = rng.choice(n, size=ell, replace=False)
    labels = rng.integers(1, 4, size=ell)
    bits = 0
    for i, s in zip(sites.tolist(), labels.tolist()):
        bits |= s << (2 * i)
    return PauliString(n, bits)


def count_weight(n: int, ell: int) -> int:
    return 3**ell * comb(n, ell)


def _check_site_perm(perm: Sequence[int], n: int) -> list[int]:
    perm = [int(x) for x in perm]
    if sorted(perm) != list(range(n)):
        raise DomainError(f"not a permutation of range({n}): {perm}")
    return perm


def permute(p: PauliString, perm: Sequence[int]) -> PauliString:
    """Move the symbol at site ``i`` to site ``perm[i]``."""
    perm = _check_site_perm(perm, p.n)
    out = [0] * p.n
    for i, s in enumerate(p.symbols()):
        out[perm[i]] = s
    return PauliString.from_symbols(out)


def _check_label_perm(g) -> tuple[int, int, int]:
    g = tuple(int(x) for x in g)
    if sorted(g) != [1, 2, 3]:
        raise DomainError(f"relabeling must permute (1, 2, 3), got {g}")
    return g


def relabel(p: PauliString, gamma) -> PauliString:
    """Map each nonzero symbol ``s`` at site ``i`` to ``gamma_i[s - 1]``.

    ``gamma`` is either one permutation ``(g(1), g(2), g(3))`` applied at every
    site, or a length-``n`` sequence of such triples.
    """
    gamma = list(gamma)
    if len(gamma) == 3 and all(np.isscalar(x) for x in gamma):
        per_site = [_check_label_perm(gamma)] * p.n
    else:
        if len(gamma) != p.n:
            raise DomainError(f"need {p.n} per-site relabelings, got {len(gamma)}")
        per_site = [_check_label_perm(g) for g in gamma]
    out = [g[s - 1] if s else 0 for g, s in zip(per_site, p.symbols())]
    return PauliString.from_symbols(out)


def pauli_matrix(p: PauliString) -> np.ndarray:
    """Dense ``sigma_{p_0} (x) ... (x) sigma_{p_{n-1}}``; site 0 is the most significant factor."""
    if p.n > MAX_DENSE_SITES:
        raise CapacityError(f"dense Pauli matrix guarded at n <= {MAX_DENSE_SITES}, got n={p.n}")
    out = np.ones((1, 1), dtype=complex)
    for s in p.symbols():
        out = np.kron(out, SIGMA[s])
    return out


def all_strings(n: int) -> list[PauliString]:
    """Every string of length ``n``, ordered by packed value."""
    return [PauliString(n, b) for b in range(4**n)]


# --- packed uint64 batches -------------------------------------------------

def _check_packed(n: int):
    if n > MAX_PACKED_SITES:
        raise CapacityError(f"packed batches hold at most {MAX_PACKED_SITES} sites, got n={n}")


def weights_packed(states: np.ndarray, n: int) -> np.ndarray:
    """Weights of a ``uint64`` array of packed strings."""
    _check_packed(n)
    states = np.asarray(states, dtype=np.uint64)
    planes = (states | (states >> np.uint64(1))) & np.uint64(_plane_mask(n))
    return np.bitwise_count(planes).astype(np.int64)


def site_symbols(states: np.ndarray, sites: np.ndarray) -> np.ndarray:
    """Symbol at per-row site index ``sites`` for each packed state."""
    shift = (2 * np.asarray(sites)).astype(np.uint64)
    return ((states >> shift) & np.uint64(3)).astype(np.int64)


def set_pair(states, i, j, a, b) -> np.ndarray:
    """Return states with sites ``i`` and ``j`` overwritten by symbols ``a`` and ``b``."""
    si = (2 * np.asarray(i)).astype(np.uint64)
    sj = (2 * np.asarray(j)).astype(np.uint64)
    three = np.uint64(3)
    clear = ~((three << si) | (three << sj))
    return (states & clear) | (np.asarray(a).astype(np.uint64) << si) | (
        np.asarray(b).astype(np.uint64) << sj
    )


def sample_uniform_weight_many(n: int, ell: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent uniform weight-``ell`` strings, packed."""
    _check_packed(n)
    if not 0 <= ell <= n:
        raise DomainError(f"weight {ell} outside 0..{n}")
    out = np.zeros(size, dtype=np.uint64)
    if ell == 0:
        return out
    sites = np.argsort(rng.random((size, n)), axis=1)[:, :ell]
    labels = rng.integers(1, 4, size=(size, ell)).astype(np.uint64)
    for c in range(ell):
        out |= labels[:, c] << (2 * sites[:, c]).astype(np.uint64)
    return out


def packed_to_str(bits: int, n: int) -> str:
    return "".join(str((int(bits) >> (2 * i)) & 3) for i in range(n))
