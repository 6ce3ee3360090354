import math

import numpy as np
import pytest

from rqclab import circuit as cq
from rqclab.errors import DomainError, RejectionCapError
from rqclab.stats import chisquare_uniform


def test_empty_and_two_qubit_circuits(rng):
    assert len(cq.sample_sequential(5, 0, rng)) == 0
    c = cq.sample_sequential(2, 50, rng)
    assert c.gates() == [(0, 1)] * 50


def test_circuit_validation():
    with pytest.raises(DomainError):
        cq.Circuit.from_gates(3, [(0, 0)])
    with pytest.raises(DomainError):
        cq.Circuit.from_gates(3, [(0, 3)])
    with pytest.raises(DomainError):
        cq.Circuit.from_gates(2, [(0, 1)], labels=("a", "b"))
    assert cq.Circuit.from_gates(4, [(3, 1)]).gates() == [(1, 3)]


def test_pair_frequencies_uniform(rng):
    n = 8
    pairs = cq.sample_pairs(n, 1_000_000, rng)
    codes = pairs[:, 0] * n + pairs[:, 1]
    counts = np.bincount(codes, minlength=n * n)
    used = counts[counts > 0]
    assert used.size == math.comb(n, 2)
    assert chisquare_uniform(used)[2] > 1e-3


@pytest.mark.parametrize(
    "gates, levels",
    [
        ([(0, 1), (2, 3), (0, 2)], ((0, 1), (2,))),
        ([(0, 1), (0, 1), (0, 1)], ((0,), (1,), (2,))),
        ([], ()),
        ([(0, 1), (2, 3), (4, 5)], ((0, 1, 2),)),
    ],
)
def test_parallelize_examples(gates, levels):
    lv = cq.parallelize(cq.Circuit.from_gates(6, gates))
    assert lv.levels == levels
    assert lv.depth == len(levels)


def test_level_pairs_view():
    c = cq.Circuit.from_gates(5, [(1, 2), (3, 4), (1, 3)])
    assert cq.parallelize(c).gate_pairs(c) == [[(1, 2), (3, 4)], [(1, 3)]]


def test_leveling_invariants(rng):
    for _ in range(10_000):
        n = int(rng.integers(2, 12))
        c = cq.sample_sequential(n, int(rng.integers(0, 30)), rng)
        lv = cq.parallelize(c)
        assert [g for lvl in lv.levels for g in lvl] == list(range(len(c)))
        for prev, lvl in zip((None,) + lv.levels, lv.levels):
            qubits = c.pairs[list(lvl)].ravel()
            assert len(set(qubits.tolist())) == qubits.size
            if prev is not None:
                used = set(c.pairs[list(prev)].ravel().tolist())
                assert used & set(c.pairs[lvl[0]].tolist())


def test_depth_counting_bounds(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 20))
        t = int(rng.integers(1, 60))
        d = cq.parallelize(cq.sample_sequential(n, t, rng)).depth
        assert cq.min_depth(n, t) <= d <= t


def test_batch_depths_match_scalar(rng):
    pairs = cq.sample_pairs(9, (500, 40), rng)
    batch = cq.batch_depths(pairs, 9)
    scalar = [cq.parallelize(cq.Circuit(9, p)).depth for p in pairs]
    np.testing.assert_array_equal(batch, scalar)


def test_rejection_sampler(rng):
    s = cq.sample_rqc_td(10, 30, 30, rng)
    assert s.rejections == 0 and s.levels.depth <= 30
    with pytest.raises(DomainError):
        cq.sample_rqc_td(10, 30, 5, rng)
    with pytest.raises(RejectionCapError) as info:
        cq.sample_rqc_td(10, 30, 6, rng, cap=20)
    assert info.value.attempts == 20


def test_rejection_sampler_n256_acceptance():
    n = 256
    t = math.ceil(n * math.log2(n) ** 2)
    d = math.ceil(8 * t / n * math.log2(n))
    depths = cq.depth_samples(n, t, 1000, seed=5)
    assert np.mean(depths <= d) >= 0.99


def test_chain_k2_bound():
    n = 64
    rep = cq.conflict_chain_frequency(n, 2, 1_000_000, seed=3)
    assert rep.frequency <= 4 / n + 3 * rep.sigma
    assert rep.bound == pytest.approx(4 / n)


def test_chain_bound_values():
    assert cq.chain_bound(64, 1) == 1.0
    assert cq.chain_bound(4, 5) == 1.0
    assert cq.chain_bound(64, 3) == pytest.approx((2 / 64) ** 2 * 6)


def test_depth_stochastically_increases_with_t():
    n = 32
    tails = [cq.depth_tail_mc(n, t, 20_000, seed=t, k_max=2) for t in (50, 100, 200, 400)]
    for a, b in zip(tails, tails[1:]):
        top = int(max(a.depths.max(), b.depths.max()))
        for d in range(top + 1):
            assert b.fraction_at_most(d) <= a.fraction_at_most(d) + 0.01
        assert np.median(b.depths) > np.median(a.depths)


def test_depth_thread_independence():
    a = cq.depth_samples(20, 100, 3000, seed=1, block_size=512)
    b = cq.depth_samples(20, 100, 3000, seed=1, threads=3, block_size=512)
    np.testing.assert_array_equal(a, b)


def test_coverage_trivial_cases():
    assert cq.coverage_probability(5, 0, 100).frequency == 0.0
    assert cq.coverage_probability(2, 1, 100).frequency == 1.0


def test_coverage_bound_form():
    assert cq.coverage_bound(64, 0) == 64
    assert cq.coverage_bound(10, 5) == pytest.approx(10 * 0.8**5)


def test_coverage_short_circuits_respect_bound():
    n, t = 16, 60
    rep = cq.coverage_probability(n, t, 100_000, seed=2)
    assert rep.uncovered_frequency <= rep.bound + 3 * rep.stderr
    assert rep.uncovered_frequency > 0
