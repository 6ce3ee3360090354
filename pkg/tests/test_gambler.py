import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqclab.errors import DomainError
from rqclab.gambler import (
    RuinInstance,
    absorption_vector,
    constant_odds_bound,
    odds,
    random_instance,
    ruin_exact_linear,
    ruin_mc,
    ruin_probability,
)

probs = st.floats(0.501, 0.999)


@pytest.mark.parametrize(
    "inst, expected",
    [
        (RuinInstance(1, 2 / 3), 1 / 3),
        (RuinInstance.constant(2, 2 / 3), 3 / 7),
        (RuinInstance(1, 0.9), 0.1),
    ],
)
def test_closed_form_examples(inst, expected):
    assert ruin_probability(inst) == pytest.approx(expected, abs=1e-14)
    assert ruin_exact_linear(inst) == pytest.approx(expected, abs=1e-14)


def test_validation():
    with pytest.raises(DomainError):
        RuinInstance(3, 0.6, (0.7,))
    with pytest.raises(DomainError):
        RuinInstance(2, 1.0, (0.7,))
    with pytest.raises(DomainError):
        RuinInstance(0, 0.6)
    with pytest.raises(DomainError):
        ruin_probability(RuinInstance.constant(3, 0.5))


def test_formula_matches_linear_solve_on_random_instances(rng):
    for _ in range(1000):
        inst = random_instance(rng)
        assert abs(ruin_probability(inst) - ruin_exact_linear(inst)) <= 1e-12


def test_recurrence_survives_long_walls():
    inst = RuinInstance.constant(2000, 2 / 3)
    p = ruin_probability(inst)
    assert np.isfinite(p)
    assert p == pytest.approx(constant_odds_bound(2.0, 2.0), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), probs, probs)
def test_constant_odds_bound(a, p_minus, p):
    inst = RuinInstance.constant(a, p, p_minus)
    assert ruin_probability(inst) <= constant_odds_bound(odds(p_minus), odds(p)) + 1e-12


def test_symmetric_walk_linear_only():
    inst = RuinInstance.constant(3, 0.5)
    assert ruin_exact_linear(inst) == pytest.approx(3 / 4, abs=1e-14)


def test_monotone_in_forward_probability():
    values = [ruin_probability(RuinInstance.constant(5, p)) for p in np.linspace(0.6, 0.99, 40)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_monotone_under_perturbation(rng):
    for _ in range(200):
        inst = random_instance(rng, max_a=10, low=0.55)
        base = ruin_probability(inst)
        idx = int(rng.integers(0, inst.a))
        fwd = inst.forward()
        fwd[idx] += (1 - fwd[idx]) / 2
        bumped = RuinInstance(inst.a, float(fwd[0]), tuple(fwd[1:]))
        assert ruin_probability(bumped) <= base + 1e-15


def test_telescoping_gaps(rng):
    for _ in range(100):
        inst = random_instance(rng, max_a=20)
        if inst.a < 2:
            continue
        P = absorption_vector(inst)  # index s + 1 holds site s
        alpha = odds(np.array(inst.p_plus))
        for i in range(1, inst.a):
            gap = P[i] - P[i + 1]
            assert gap == pytest.approx(np.prod(alpha[i - 1 :]) * P[inst.a], abs=1e-10)


@pytest.mark.parametrize(
    "inst",
    [RuinInstance.constant(2, 2 / 3), RuinInstance(4, 0.55, (0.6, 0.7, 0.8)), RuinInstance(1, 0.9)],
)
def test_monte_carlo_agrees(inst):
    p, se = ruin_mc(inst, 1_000_000, seed=7)
    exact = ruin_probability(inst)
    assert abs(p - exact) <= 3 * np.sqrt(exact * (1 - exact) / 1_000_000)
    assert se > 0
