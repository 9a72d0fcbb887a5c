from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oqt import channels as ch
from oqt.gateset import (GateSet, concat, format_sequence, gauge_transform, parse_sequence, power,
                         sequence_probability)

from conftest import random_gateset, random_gauge, random_sequence


def perfect():
    return GateSet(ch.ZERO_STATE, ch.ZERO_STATE, {"Rx": ch.rx(np.pi / 2), "Ry": ch.ry(np.pi / 2)})


def test_sequence_probability_examples():
    gs = perfect()
    assert sequence_probability(gs, ()) == pytest.approx(1.0)
    assert sequence_probability(gs, ("Rx", "Rx")) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(KeyError):
        sequence_probability(gs, ("Rz",))


@pytest.mark.parametrize("n", [0, 1, 5, 17])
def test_ramsey_probability_is_cos_squared(n):
    omega = 0.346754
    gs = GateSet(ch.ZERO_STATE, ch.ZERO_STATE, {"Rx": ch.rx(np.pi / 2), "dt": ch.rz(omega)})
    p = gs.probability(("Rx",) + ("dt",) * n + ("Rx",))
    # the two pi/2 pulses add to a flip, so the |0> survival is sin^2(omega n / 2)
    assert p == pytest.approx(np.sin(omega * n / 2) ** 2, abs=1e-14)
    assert 1 - p == pytest.approx(np.cos(omega * n / 2) ** 2, abs=1e-14)


def test_superop_composition_order(rng):
    gs = random_gateset(rng)
    s, t = ("Gx", "Gy"), ("Gi", "Gx", "Gx")
    assert np.allclose(gs.superop(concat(s, t)), gs.superop(t) @ gs.superop(s))


def test_sequence_text_round_trip():
    for s in [(), ("Gx",), ("Gx", "Gy", "Gi")]:
        assert parse_sequence(format_sequence(s)) == s
    assert format_sequence(()) == "()"
    assert power(("a", "b"), 2) == ("a", "b", "a", "b")
    with pytest.raises(ValueError):
        parse_sequence("Gx,,Gy")


def test_gate_set_validation():
    with pytest.raises(ValueError):
        GateSet(ch.ZERO_STATE, ch.ZERO_STATE, {"G": np.eye(3)})
    with pytest.raises(ValueError):
        GateSet(ch.ZERO_STATE, ch.ZERO_STATE, {"a,b": np.eye(4)})


def test_gauge_transform_examples(rng):
    gs = random_gateset(rng)
    same = gauge_transform(gs, np.eye(4))
    assert np.allclose(same.rho, gs.rho) and np.allclose(same.effect, gs.effect)
    b = random_gauge(rng)
    back = gauge_transform(gauge_transform(gs, b), np.linalg.inv(b))
    for k in gs.gates:
        assert np.allclose(back.gates[k], gs.gates[k], atol=1e-9)
    assert np.allclose(back.rho, gs.rho, atol=1e-9)
    with pytest.raises(ValueError):
        gauge_transform(gs, np.zeros((4, 4)))


@given(st.integers(0, 2**32 - 1))
def test_probabilities_are_gauge_invariant(seed):
    rng = np.random.default_rng(seed)
    gs = random_gateset(rng)
    moved = gauge_transform(gs, random_gauge(rng))
    for _ in range(20):
        s = random_sequence(rng, gs.labels, 10)
        assert abs(gs.probability(s) - moved.probability(s)) < 1e-9


@given(st.integers(0, 2**32 - 1))
def test_physical_probabilities_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    gs = random_gateset(rng)
    for _ in range(10):
        p = gs.probability(random_sequence(rng, gs.labels, 12))
        assert -1e-12 <= p <= 1 + 1e-12
