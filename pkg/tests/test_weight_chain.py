import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from rqclab.errors import DomainError
from rqclab import weight_chain as wc
from rqclab.stats import binomial_sigma, total_variation


@pytest.mark.parametrize(
    "n, ell, expected",
    [
        (4, 2, (Fraction(1, 15), Fraction(8, 15), Fraction(6, 15))),
        (2, 1, (Fraction(0), Fraction(2, 5), Fraction(3, 5))),
        (7, 0, (Fraction(0), Fraction(1), Fraction(0))),
        (7, 7, (Fraction(2 * 7 * 6, 5 * 7 * 6), Fraction(1) - Fraction(2, 5), Fraction(0))),
    ],
)
def test_exact_rows(n, ell, expected):
    assert wc.exact_row(n, ell) == expected


def test_float_rows_match_exact():
    chain = wc.build(4)
    assert chain.row(2) == pytest.approx((1 / 15, 8 / 15, 6 / 15), abs=1e-15)


def test_build_rejects_small_n():
    with pytest.raises(DomainError):
        wc.build(1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 512))
def test_rows_stochastic_in_rationals(n):
    chain = wc.build(n)
    for down, stay, up in chain.rows:
        assert down + stay + up == 1
        assert min(down, stay, up) >= 0
    assert chain.rows[0] == (0, 1, 0)
    assert chain.rows[1][0] == 0
    assert chain.rows[n][2] == 0


def test_rows_stochastic_full_range():
    for n in range(2, 513):
        assert all(sum(r) == 1 for r in wc.build(n).rows)


def test_stationary_n2():
    np.testing.assert_allclose(wc.stationary(2), [0.4, 0.6], atol=1e-15)


@pytest.mark.parametrize("n", range(2, 21))
def test_stationary_is_invariant(n):
    pi = wc.stationary(n)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    full = np.concatenate(([0.0], pi))
    np.testing.assert_allclose(full @ wc.build(n).dense(), full, atol=1e-12, rtol=0)


def test_stationary_matches_closed_form():
    n = 10
    ref = np.array([3**k * math.comb(n, k) for k in range(1, n + 1)]) / (4**n - 1)
    np.testing.assert_allclose(wc.stationary(n), ref, rtol=1e-12)


@pytest.mark.parametrize("n", [2, 5, 16, 64])
def test_detailed_balance(n):
    chain = wc.build(n)
    pi = np.concatenate(([0.0], wc.stationary(n)))
    lhs = pi[1:-1] * chain.up[1:-1]
    rhs = pi[2:] * chain.down[2:]
    np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_stationary_preserved_by_powers():
    for n, t in [(8, 1000), (32, 1000), (17, 333)]:
        chain = wc.build(n)
        pi = wc.stationary(n)
        acc = np.zeros(n + 1)
        for ell in range(1, n + 1):
            acc += pi[ell - 1] * wc.evolve_exact(n, ell, t, chain)
        np.testing.assert_allclose(acc[1:], pi, atol=1e-9)


def test_evolve_exact_examples():
    np.testing.assert_array_equal(wc.evolve_exact(5, 3, 0), np.eye(6)[3])
    np.testing.assert_allclose(wc.evolve_exact(2, 1, 1), [0, 0.4, 0.6], atol=1e-15)
    row = wc.evolve_exact(8, 3, 10_000)
    assert row.sum() == pytest.approx(1.0, abs=1e-9)
    assert total_variation(row[1:], wc.stationary(8)) <= 1e-6


def test_evolve_log_matches_linear():
    lin = wc.evolve_exact(20, 2, 300)
    log = wc.evolve_log(20, 2, 300)
    np.testing.assert_allclose(np.exp(log[1:]), lin[1:], rtol=1e-10)
    assert log[0] == -np.inf


def test_one_step_frequencies(rng):
    chain = wc.build(4)
    draws = wc.step_many(chain, np.full(1_000_000, 2), rng)
    freq = np.bincount(draws - 1, minlength=3) / draws.size
    for f, p in zip(freq, (1 / 15, 8 / 15, 6 / 15)):
        assert abs(f - p) <= 3 * binomial_sigma(p, draws.size)


def test_scalar_step_agrees_with_row(rng):
    chain = wc.build(4)
    draws = np.array([wc.step(chain, 2, rng) for _ in range(30_000)])
    freq = np.bincount(draws - 1, minlength=3) / draws.size
    for f, p in zip(freq, (1 / 15, 8 / 15, 6 / 15)):
        assert abs(f - p) <= 3 * binomial_sigma(p, draws.size)


def test_zero_weight_is_absorbing(rng):
    chain = wc.build(5)
    final, path = wc.run_trajectory(chain, 0, 200, rng, path=True)
    assert final == 0 and set(path) == {0}


def test_trajectory_law_matches_exact(rng):
    chain = wc.build(6)
    finals = wc.run_trajectories(chain, 1, 500, 100_000, rng)
    emp = np.bincount(finals, minlength=7) / finals.size
    assert total_variation(emp, wc.evolve_exact(6, 1, 500)) <= 0.01


def test_accelerated_boundary(rng):
    chain = wc.build(2)
    assert all(wc.accelerated_step(chain, 1, rng)[0] == 2 for _ in range(1000))
    with pytest.raises(DomainError):
        wc.accelerated_step(chain, 0, rng)


def test_accelerated_mean_wait(rng):
    chain = wc.build(4)
    waits = np.array([wc.accelerated_step(chain, 2, rng)[1] for _ in range(1_000_000)])
    p = 7 / 15
    sd = math.sqrt(1 - p) / p
    assert abs(waits.mean() - 8 / 7) <= 3 * sd / math.sqrt(waits.size)


def test_accelerated_hitting_law_matches_direct(rng):
    chain = wc.build(6)
    fast = wc.hitting_times_accelerated(chain, 1, 4, 100_000, rng)
    res = wc.hitting_time_mc(chain, 1, 4, 100_000, seed=11)
    assert res.censored == 0
    direct = np.repeat(np.arange(res.histogram.size), res.histogram)
    assert ks_2samp(fast, direct).statistic <= 0.02


def test_single_transition_hitting_mean():
    res = wc.hitting_time_mc(wc.build(2), 1, 2, 1_000_000, seed=1)
    sd = math.sqrt(0.4) / 0.6
    assert res.histogram[0] == 0
    assert abs(res.mean - 5 / 3) <= 3 * sd / math.sqrt(res.trials)


def test_hitting_start_equals_target():
    res = wc.hitting_time_mc(wc.build(10), 4, 4, 100)
    assert res.mean == 0 and res.quantile(0.99) == 0


def test_hitting_downward_and_censoring():
    chain = wc.build(20)
    res = wc.hitting_time_mc(chain, 20, 15, 2000, seed=2)
    assert res.censored == 0 and res.quantile(0.5) >= 1
    short = wc.hitting_time_mc(chain, 1, 19, 500, t_max=5, seed=2)
    assert short.censored == 500 and short.quantile(0.5) == float("inf")


def test_hitting_unreachable_target():
    with pytest.raises(DomainError):
        wc.hitting_time_mc(wc.build(5), 1, 6, 10)


def test_hitting_thread_independence():
    chain = wc.build(16)
    a = wc.hitting_time_mc(chain, 1, 11, 5000, seed=9, threads=1)
    b = wc.hitting_time_mc(chain, 1, 11, 5000, seed=9, threads=3)
    np.testing.assert_array_equal(a.histogram, b.histogram)


def test_reference_points_examples():
    assert wc.reference_points(100, 0.05) == (70, 80, True)
    x = 69
    assert 3 * (100 - x) / (x - 1) >= 1.1


@pytest.mark.parametrize("delta", [0.0, 1 / 16, 0.1, -0.01])
def test_reference_points_reject_delta(delta):
    with pytest.raises(DomainError):
        wc.reference_points(100, delta)


def test_bound_bulk_dominated_by_stationary_term():
    n = 32
    rep = wc.check_theorem_bound(n, 1, 24, 20_000, 0.05, c_poly=0.0)
    assert rep.passed
    assert rep.log_lhs <= rep.log_stationary_term


def test_bound_degenerate_at_time_zero():
    rep = wc.check_theorem_bound(32, 3, 3, 0, 0.05, c_poly=1e-6)
    assert rep.lhs == pytest.approx(1.0)
    assert not rep.passed


def test_bound_sweep_passes_at_n64():
    n = 64
    t = math.ceil(4 * n * math.log2(n) ** 2)
    reports = wc.theorem_bound_sweep(n, 1, t, 0.1, c_poly=1.0)
    assert len(reports) == n
    assert all(r.passed for r in reports)


def test_binary_entropy_endpoints():
    np.testing.assert_allclose(wc.binary_entropy([0, 0.5, 1]), [0, 1, 0])


def test_binomial_estimates_hold_on_grid():
    fails = wc.binomial_estimate_failures()
    assert fails == {"tail": [], "central": [], "continuity": [], "sqrt": []}


def test_binomial_tail_needs_alpha_at_most_half():
    # past alpha = 1/2 the partial sum exceeds 2^(n h(alpha)); the estimate is one-sided
    n, k = 10, 9
    assert math.log2(sum(math.comb(n, j) for j in range(k + 1))) > n * float(wc.binary_entropy(k / n))
