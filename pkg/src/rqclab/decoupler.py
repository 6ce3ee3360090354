"""Dense density-matrix engine for small decoupling experiments.

A :class:`DensityMatrix` lives on ``n_a`` system qubits followed by one
environment block of ``n_e`` qubits.  Matrix indices put system qubit 0 at
the most significant position and the environment last, matching
:func:`rqclab.pauli.pauli_matrix` on the system part.

Trace distances are plain Schatten-1 norms (maximum value 2, no factor 1/2).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from rqclab.circuit import Circuit, sample_pairs
from rqclab.errors import CapacityError, DomainError
from rqclab.pauli import SIGMA, PauliString, all_strings, pauli_matrix
from rqclab.stats import run_blocks

MAX_TOTAL_QUBITS = 12
MAX_ENV_QUBITS = 4
PINV_CUTOFF = 1e-12


class GateEnsemble(str, enum.Enum):
    HAAR = "haar"
    CLIFFORD = "clifford"


# --- two-qubit gates -------------------------------------------------------

def haar_unitaries(count: int, rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    """``count`` Haar-distributed unitaries via QR with the diagonal phase fixed."""
    z = (rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def _phase_key(u: np.ndarray) -> bytes:
    flat = u.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-8))
    v = u * (abs(flat[k]) / flat[k])
    return np.rint(np.stack([v.real, v.imag]) * 1000).astype(np.int64).tobytes()


@lru_cache(maxsize=1)
def clifford_group() -> np.ndarray:
    """All 11520 two-qubit Cliffords modulo global phase, as a ``(11520, 4, 4)`` array."""
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    s = np.diag([1, 1j])
    eye = np.eye(2)
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    gens = [np.kron(h, eye), np.kron(eye, h), np.kron(s, eye), np.kron(eye, s), cnot]
    seen = {_phase_key(np.eye(4)): np.eye(4, dtype=complex)}
    frontier = [np.eye(4, dtype=complex)]
    while frontier:
        nxt = []
        for u in frontier:
            for g in gens:
                v = g @ u
                key = _phase_key(v)
                if key not in seen:
                    seen[key] = v
                    nxt.append(v)
        frontier = nxt
    group = np.array(list(seen.values()))
    group.setflags(write=False)
    return group


def sample_gates(ens: GateEnsemble | str, count: int, rng: np.random.Generator) -> np.ndarray:
    ens = GateEnsemble(ens)
    if ens is GateEnsemble.HAAR:
        return haar_unitaries(count, rng)
    group = clifford_group()
    return group[rng.integers(0, len(group), count)]


def sample_gate(ens: GateEnsemble | str, rng: np.random.Generator) -> np.ndarray:
    return sample_gates(ens, 1, rng)[0]


# --- states ----------------------------------------------------------------

@dataclass(frozen=True)
class DensityMatrix:
    data: np.ndarray = field(repr=False)
    n_a: int
    n_e: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if self.n_a < 0 or self.n_e < 0:
            raise DomainError("qubit counts must be nonnegative")
        _check_guard(self.n_a, self.n_e)
        d = self.dim
        if data.shape != (d, d):
            raise DomainError(f"expected a {d}x{d} matrix for {self.n_a}+{self.n_e} qubits, got {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return 2 ** (self.n_a + self.n_e)

    @property
    def d_a(self) -> int:
        return 2**self.n_a

    @property
    def d_e(self) -> int:
        return 2**self.n_e

    @property
    def dims(self) -> list[int]:
        return [2] * self.n_a + ([self.d_e] if self.n_e else [])

    def is_valid(self, tol: float = 1e-9) -> bool:
        m = self.data
        if not np.allclose(m, m.conj().T, atol=1e-10):
            return False
        if abs(np.trace(m) - 1) > 1e-10:
            return False
        return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -tol)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.data, self.data)))


def _check_guard(n_a: int, n_e: int = 0):
    if n_a + n_e > MAX_TOTAL_QUBITS:
        raise CapacityError(f"dense simulation guarded at {MAX_TOTAL_QUBITS} qubits, got {n_a + n_e}")
    if n_e > MAX_ENV_QUBITS:
        raise CapacityError(f"environment block guarded at {MAX_ENV_QUBITS} qubits, got {n_e}")


def _pure(vec: np.ndarray, n_a: int, n_e: int) -> DensityMatrix:
    vec = vec / np.linalg.norm(vec)
    return DensityMatrix(np.outer(vec, vec.conj()), n_a, n_e)


def bell_pairs_state(n_a: int, n_e: int) -> DensityMatrix:
    """System qubits ``0..n_e-1`` each maximally entangled with one environment qubit, rest ``|0>``."""
    if n_e > n_a:
        raise DomainError("cannot entangle more environment qubits than system qubits")
    _check_guard(n_a, n_e)
    d_rest = 2 ** (n_a - n_e)
    d_e = 2**n_e
    psi = np.zeros((d_e, d_rest, d_e), dtype=complex)
    for x in range(d_e):
        psi[x, 0, x] = 1.0
    return _pure(psi.ravel(), n_a, n_e)


def maximally_mixed_state(n_a: int, rho_e: np.ndarray | None = None) -> DensityMatrix:
    """``I / 2^n_a`` tensored with ``rho_e`` (no environment when omitted)."""
    _check_guard(n_a)
    if rho_e is None:
        return DensityMatrix(np.eye(2**n_a) / 2**n_a, n_a, 0)
    rho_e = np.asarray(rho_e, dtype=complex)
    n_e = int(round(math.log2(rho_e.shape[0])))
    return DensityMatrix(np.kron(np.eye(2**n_a) / 2**n_a, rho_e), n_a, n_e)


def product_pure_state(psi_a: np.ndarray, phi_e: np.ndarray | None = None) -> DensityMatrix:
    psi_a = np.asarray(psi_a, dtype=complex)
    n_a = int(round(math.log2(psi_a.size)))
    if phi_e is None:
        return _pure(psi_a, n_a, 0)
    phi_e = np.asarray(phi_e, dtype=complex)
    return _pure(np.kron(psi_a, phi_e), n_a, int(round(math.log2(phi_e.size))))


def random_pure_state(n_a: int, n_e: int, rng: np.random.Generator) -> DensityMatrix:
    _check_guard(n_a, n_e)
    d = 2 ** (n_a + n_e)
    return _pure(rng.standard_normal(d) + 1j * rng.standard_normal(d), n_a, n_e)


def random_mixed_state(n_a: int, n_e: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Full-rank (by default) state from a Gaussian Ginibre matrix."""
    _check_guard(n_a, n_e)
    d = 2 ** (n_a + n_e)
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m), n_a, n_e)


def random_density_e(n_e: int, rng: np.random.Generator) -> np.ndarray:
    return random_mixed_state(0, n_e, rng).data


# --- gate application ------------------------------------------------------

def _apply_rows(tensor: np.ndarray, u4: np.ndarray, i: int, j: int, offset: int) -> np.ndarray:
    u = u4.reshape(2, 2, 2, 2)
    out = np.tensordot(u, tensor, axes=([2, 3], [offset + i, offset + j]))
    return np.moveaxis(out, [0, 1], [offset + i, offset + j])


def apply_gate(rho: DensityMatrix, u4: np.ndarray, i: int, j: int) -> DensityMatrix:
    """``(U_ij (x) I) rho (U_ij (x) I)^dagger`` with ``i`` the gate's more significant qubit."""
    if i == j or not (0 <= i < rho.n_a and 0 <= j < rho.n_a):
        raise DomainError(f"gate on ({i}, {j}) outside system qubits 0..{rho.n_a - 1}")
    side = rho.dims
    t = rho.data.reshape(side + side)
    t = _apply_rows(t, u4, i, j, 0)
    t = _apply_rows(t, u4.conj(), i, j, len(side))
    return DensityMatrix(t.reshape(rho.dim, rho.dim), rho.n_a, rho.n_e)


def apply_circuit(
    rho: DensityMatrix,
    c: Circuit,
    ens: GateEnsemble | str = GateEnsemble.HAAR,
    rng: np.random.Generator | None = None,
) -> DensityMatrix:
    """Apply the circuit gate by gate.

    Gates use ``c.labels`` when present (one 4x4 unitary per gate); otherwise
    fresh gates are drawn from ``ens``.
    """
    _check_guard(rho.n_a, rho.n_e)
    if c.n != rho.n_a:
        raise DomainError(f"circuit on {c.n} qubits, state has {rho.n_a} system qubits")
    if c.labels is not None:
        gates = [np.asarray(g, dtype=complex) for g in c.labels]
    else:
        if rng is None:
            raise DomainError("an rng is required when the circuit carries no gate labels")
        gates = sample_gates(ens, len(c), rng)
    for (i, j), u in zip(c.pairs.tolist(), gates):
        rho = apply_gate(rho, u, i, j)
    return rho


# --- partial trace, norms, entropies --------------------------------------

def partial_trace(rho: DensityMatrix, keep, keep_env: bool = True) -> DensityMatrix:
    """Trace out every system qubit not in ``keep`` (and the environment unless ``keep_env``)."""
    keep = sorted(set(int(k) for k in keep))
    if any(not 0 <= k < rho.n_a for k in keep):
        raise DomainError(f"kept qubits {keep} outside 0..{rho.n_a - 1}")
    side = rho.dims
    n_sub = len(side)
    kept = keep + ([rho.n_a] if (keep_env and rho.n_e) else [])
    traced = [k for k in range(n_sub) if k not in kept]
    t = rho.data.reshape(side + side)
    letters = [chr(ord("a") + k) for k in range(2 * n_sub)]
    for k in traced:
        letters[n_sub + k] = letters[k]
    out_letters = [letters[k] for k in kept] + [letters[n_sub + k] for k in kept]
    spec = "".join(letters) + "->" + "".join(out_letters)
    red = np.einsum(spec, t)
    d = int(np.prod([side[k] for k in kept])) if kept else 1
    return DensityMatrix(red.reshape(d, d), len(keep), rho.n_e if (keep_env and rho.n_e) else 0)


def env_marginal(rho: DensityMatrix) -> np.ndarray:
    if rho.n_e == 0:
        return np.ones((1, 1), dtype=complex)
    return partial_trace(rho, [], keep_env=True).data


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, DensityMatrix) else np.asarray(x)


def trace_distance(rho, sigma) -> float:
    """Schatten-1 norm ``||rho - sigma||_1``."""
    a, b = _as_array(rho), _as_array(sigma)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def matrix_power_psd(m: np.ndarray, power: float, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    """Spectral power of a PSD matrix; eigenvalues below ``cutoff`` map to zero."""
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    wp = np.zeros_like(w)
    big = w > cutoff
    wp[big] = w[big] ** power
    return (v * wp) @ v.conj().T


def tilde(rho: DensityMatrix) -> np.ndarray:
    """``rho_E^(-1/4) rho_AE rho_E^(-1/4)`` with the pseudo-inverse convention."""
    if rho.n_e == 0:
        return rho.data.copy()
    x = np.kron(np.eye(rho.d_a), matrix_power_psd(env_marginal(rho), -0.25))
    return x @ rho.data @ x


def tilde_purity(rho: DensityMatrix) -> float:
    t = tilde(rho)
    return float(np.real(np.vdot(t, t)))


def h2_conditional(rho: DensityMatrix) -> float:
    """Conditional collision entropy ``-log2 tr[(rho_E^-1/4 rho rho_E^-1/4)^2]`` in bits."""
    return -math.log2(tilde_purity(rho))


# --- Pauli-basis quantities -----------------------------------------------

def pauli_components(x: np.ndarray, n_a: int, d_e: int) -> np.ndarray:
    """``tr_A[sigma_nu X]`` for every system string ``nu``.

    Returns shape ``(4**n_a, d_e, d_e)`` indexed by the packed string value
    (site 0 in the least significant position).
    """
    side = [2] * n_a + [d_e]
    t = np.asarray(x).reshape(side + side)
    ndim_side = n_a + 1
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[: ndim_side])
    cols = list(letters[ndim_side : 2 * ndim_side])
    pauli_idx = list("ABCDEFGHIJKLMNOP"[:n_a])
    operands = []
    specs = []
    for s in range(n_a):
        # sigma[b, a] pairs column index b with row index a: tr[sigma X] = sum_ab sigma_ba X_ab
        specs.append(pauli_idx[s] + cols[s] + rows[s])
        operands.append(SIGMA)
    specs.append("".join(rows) + "".join(cols))
    operands.append(t)
    out_spec = "".join(reversed(pauli_idx)) + rows[n_a] + cols[n_a]
    res = np.einsum(",".join(specs) + "->" + out_spec, *operands, optimize=True)
    return res.reshape(4**n_a, d_e, d_e)


def pauli_masses(rho: DensityMatrix) -> np.ndarray:
    """``tr[tr_A[sigma_nu rho~]^2]`` for each packed system string ``nu``."""
    c = pauli_components(tilde(rho), rho.n_a, rho.d_e)
    return np.real(np.einsum("vef,vfe->v", c, c))


def pauli_level_masses(rho: DensityMatrix) -> np.ndarray:
    """Total Pauli mass at each weight ``0..n_a``."""
    if rho.n_a > 6:
        raise CapacityError(f"level masses guarded at n <= 6, got {rho.n_a}")
    masses = pauli_masses(rho)
    weights = np.array([p.weight for p in all_strings(rho.n_a)]) if rho.n_a else np.zeros(1, int)
    return np.bincount(weights, weights=masses, minlength=rho.n_a + 1)


def pauli_level_mass(rho: DensityMatrix, ell: int) -> float:
    if not 0 <= ell <= rho.n_a:
        raise DomainError(f"weight {ell} outside 0..{rho.n_a}")
    return float(pauli_level_masses(rho)[ell])


@dataclass
class LevelReport:
    n: int
    masses: np.ndarray
    bounds_at_eta: np.ndarray
    best_eta: float
    tilde_purity: float


def level_bound_report(rho: DensityMatrix, eta: float | None = None) -> LevelReport:
    """Largest ``eta`` with ``mass_l <= 12 n^4 (3 - eta)^l C(n, l)`` for every ``l >= 1``.

    ``bounds_at_eta`` evaluates the right-hand side at ``eta`` (the best one
    when not given).
    """
    n = rho.n_a
    masses = pauli_level_masses(rho)
    pref = 12 * n**4
    etas = []
    for ell in range(1, n + 1):
        ratio = masses[ell] / (pref * math.comb(n, ell))
        etas.append(3.0 if ratio <= 0 else 3.0 - ratio ** (1.0 / ell))
    best = min(etas) if etas else 3.0
    use = best if eta is None else eta
    bounds = np.array([pref * (3 - use) ** ell * math.comb(n, ell) for ell in range(n + 1)])
    return LevelReport(n, masses, bounds, best, tilde_purity(rho))


def sampled_purity(rho: DensityMatrix, m: int) -> float:
    """Average of ``tr[rho~_{A_S E}^2]`` over all system subsets ``S`` of size ``m``."""
    if rho.n_a > 8:
        raise CapacityError(f"subset averaging guarded at n <= 8, got {rho.n_a}")
    if not 0 <= m <= rho.n_a:
        raise DomainError(f"subset size {m} outside 0..{rho.n_a}")
    vals = [tilde_purity(partial_trace(rho, s)) for s in itertools.combinations(range(rho.n_a), m)]
    return float(np.mean(vals))


# --- decoupling experiments -----------------------------------------------

def _decoupling_target(rho: DensityMatrix, s: int) -> np.ndarray:
    return np.kron(np.eye(2**s) / 2**s, env_marginal(rho))


def _check_decoupling(rho: DensityMatrix):
    if rho.n_a > 8 or rho.n_e > MAX_ENV_QUBITS:
        raise CapacityError(f"decoupling runs guarded at 8 system and {MAX_ENV_QUBITS} environment qubits")


@dataclass
class DecouplingPoint:
    t: int
    trials: int
    mean: float
    stderr: float


def decoupling_samples(
    rho: DensityMatrix,
    keep,
    t_grid,
    ens: GateEnsemble | str = GateEnsemble.HAAR,
    trials: int = 200,
    seed: int = 0,
) -> np.ndarray:
    """Per-trial ``||tr_{S^c}[U rho U^dag] - I/2^s (x) rho_E||_1`` on a grid of circuit lengths.

    Each trial grows one circuit to ``max(t_grid)`` gates and is read off at
    every grid point, so columns share circuit prefixes.  Returns an array of
    shape ``(trials, len(sorted(set(t_grid))))``.
    """
    _check_decoupling(rho)
    keep = sorted(set(keep))
    grid = sorted(set(int(t) for t in t_grid))
    target = _decoupling_target(rho, len(keep))
    t_max = grid[-1] if grid else 0

    def block(size, rng):
        vals = np.zeros((size, len(grid)))
        for trial in range(size):
            state = rho
            pairs = sample_pairs(rho.n_a, t_max, rng) if t_max else np.zeros((0, 2), int)
            gates = sample_gates(ens, t_max, rng) if t_max else []
            g = 0
            for col, t in enumerate(grid):
                while g < t:
                    state = apply_gate(state, gates[g], *pairs[g])
                    g += 1
                vals[trial, col] = trace_distance(partial_trace(state, keep), target)
        return vals

    return np.concatenate(run_blocks(block, trials, seed, block_size=64))


def decoupling_curve(
    rho: DensityMatrix,
    keep,
    t_grid,
    ens: GateEnsemble | str = GateEnsemble.HAAR,
    trials: int = 200,
    seed: int = 0,
) -> list[DecouplingPoint]:
    """Mean and standard error of :func:`decoupling_samples` at each grid point."""
    grid = sorted(set(int(t) for t in t_grid))
    vals = decoupling_samples(rho, keep, grid, ens, trials, seed)
    sd = vals.std(axis=0, ddof=1) if trials > 1 else np.zeros(len(grid))
    return [
        DecouplingPoint(t, trials, float(vals[:, c].mean()), float(sd[c] / np.sqrt(trials)))
        for c, t in enumerate(grid)
    ]


def decoupling_error(
    rho: DensityMatrix,
    keep,
    t: int,
    ens: GateEnsemble | str = GateEnsemble.HAAR,
    trials: int = 200,
    seed: int = 0,
) -> tuple[float, float]:
    """Mean and standard error of the decoupling distance after ``t`` random gates."""
    p = decoupling_curve(rho, keep, [t], ens, trials, seed)[0]
    return p.mean, p.stderr


# --- gate-level second moments versus the string chain ---------------------

@lru_cache(maxsize=8)
def _pauli_stack(n: int) -> np.ndarray:
    return np.array([pauli_matrix(p) for p in all_strings(n)])


def embed_gates(u4: np.ndarray, pairs: np.ndarray, n: int) -> np.ndarray:
    """Full ``2^n``-dimensional unitaries for a batch of gates on given pairs."""
    b = u4.shape[0]
    d = 2**n
    out = np.empty((b, d, d), dtype=complex)
    rest_dim = 2 ** (n - 2)
    base = np.einsum("bxy,zw->bxzyw", u4, np.eye(rest_dim)).reshape((b,) + (2,) * (2 * n))
    for key in {tuple(p) for p in pairs.tolist()}:
        sel = np.all(pairs == key, axis=1)
        i, j = key
        order = [i, j] + [q for q in range(n) if q not in key]
        inv = np.argsort(order)
        perm = [0] + [1 + inv[q] for q in range(n)] + [1 + n + inv[q] for q in range(n)]
        out[sel] = base[sel].transpose(perm).reshape(-1, d, d)
    return out


ROUNDOFF = 1e-10


def _z_scores(diff: np.ndarray, se: np.ndarray) -> np.ndarray:
    # differences at floating-point roundoff count as exact agreement
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / se
    return np.where(np.abs(diff) <= ROUNDOFF, 0.0, np.where(se > 0, z, np.inf))


@dataclass
class MomentReport:
    n: int
    mu: PauliString
    t: int
    ensemble: str
    trials: int
    mean: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    exact: np.ndarray = field(repr=False)

    @property
    def z(self) -> np.ndarray:
        return _z_scores(self.mean - self.exact, self.stderr)

    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))


def _moment_block(n, mu_mat, t, ens, size, rng):
    x = np.broadcast_to(mu_mat, (size,) + mu_mat.shape).copy()
    for _ in range(t):
        u = embed_gates(sample_gates(ens, size, rng), sample_pairs(n, size, rng), n)
        x = u @ x @ np.conj(np.swapaxes(u, 1, 2))
    coeff = np.einsum("vab,sba->sv", _pauli_stack(n), x, optimize=True).real / 2**n
    sq = coeff**2
    return sq.sum(axis=0), (sq**2).sum(axis=0)


def moment_consistency(
    mu: PauliString,
    t: int,
    trials: int,
    ens: GateEnsemble | str = GateEnsemble.HAAR,
    seed: int = 0,
    exact: np.ndarray | None = None,
) -> MomentReport:
    """Estimate ``E[(tr[sigma_nu U sigma_mu U^dag] / 2^n)^2]`` for every ``nu``.

    The expectation is over ``t``-gate random circuits; ``exact`` defaults to
    the ``Q^t`` row from :mod:`rqclab.string_chain`.
    """
    from rqclab.string_chain import build_q_matrix

    n = mu.n
    if n > 4:
        raise CapacityError(f"moment check guarded at n <= 4, got {n}")
    if n < 2:
        raise DomainError("need n >= 2")
    ens = GateEnsemble(ens)
    mu_mat = pauli_matrix(mu)
    parts = run_blocks(lambda size, rng: _moment_block(n, mu_mat, t, ens, size, rng), trials, seed, block_size=8192)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / trials
    var = np.maximum(s2 / trials - mean**2, 0.0) * trials / max(trials - 1, 1)
    if exact is None:
        exact = build_q_matrix(n).power_row(mu, t)
    return MomentReport(n, mu, t, ens.value, trials, mean, np.sqrt(var / trials), np.asarray(exact))


def two_sample_z(a: MomentReport, b: MomentReport) -> np.ndarray:
    """Welch z statistic per string between two moment estimates."""
    return _z_scores(a.mean - b.mean, np.sqrt(a.stderr**2 + b.stderr**2))
