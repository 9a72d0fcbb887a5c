from __future__ import annotations

import numpy as np
import pytest

from oqt import channels as ch
from oqt.priors import ChannelPrior, PriorSpec, exact_spec
from oqt.protocols import lsgst, ramsey, rb, statetomo


def test_exact_named_values(rng):
    assert np.allclose(ChannelPrior.exact("zero").sample(rng), ch.ZERO_STATE)
    assert np.allclose(ChannelPrior.exact("identity").sample(rng), np.eye(4))
    with pytest.raises(ValueError):
        ChannelPrior.exact("plus").sample(rng)


def test_rotation_prior_without_variance_is_ideal(rng):
    assert np.allclose(ChannelPrior.rotation("x", np.pi / 2).sample(rng), ch.rx(np.pi / 2))
    assert np.allclose(ChannelPrior.rotation("h", np.pi / 2).sample(rng), ch.unitary_superop(ch.HADAMARD),
                       atol=1e-14)


def test_uniform_rotation_angle_range(rng):
    prior = ChannelPrior.uniform_rotation("z", 0.0, 1.0)
    for _ in range(50):
        g = prior.sample(rng)
        angle = np.arctan2(g[2, 1], g[1, 1])
        assert 0.0 <= angle <= 1.0


def test_rotation_variance_matches_angle_spread():
    rng = np.random.default_rng(3)
    prior = ChannelPrior.rotation("x", np.pi / 2, 1e-3)
    angles = []
    for _ in range(4000):
        g = prior.sample(rng)
        angles.append(np.arctan2(g[3, 2], g[2, 2]))
    assert np.var(angles) == pytest.approx(1e-3, rel=0.1)
    assert np.mean(angles) == pytest.approx(np.pi / 2, abs=3e-3)


def test_depolarized_prior_shrinks_bloch_vector(rng):
    prior = ChannelPrior.exact("zero").depolarized(0.0, 0.1)
    for _ in range(50):
        z = prior.sample(rng)
        assert 0.9 - 1e-12 <= z[3] / z[0] <= 1.0


def test_mixture_priors_are_physical(rng):
    chan = ChannelPrior.rotation("y", np.pi / 2).bcsz_mixed(1e-3)
    state = ChannelPrior.exact("zero").ginibre_mixed(1e-3)
    for _ in range(20):
        g = chan.sample(rng)
        assert ch.is_completely_positive(g) and ch.is_trace_preserving(g)
        assert np.linalg.norm(g - ch.ry(np.pi / 2)) < 1e-2
        assert np.linalg.eigvalsh(ch.from_superket(state.sample(rng))).min() >= -1e-12


def test_prior_validation():
    with pytest.raises(ValueError):
        ChannelPrior("wishart")
    with pytest.raises(ValueError):
        ChannelPrior("depolarizing", {"p": 0.1})
    with pytest.raises(ValueError):
        ChannelPrior.exact("zero").depolarized(1.5)
    with pytest.raises(ValueError):
        ChannelPrior.rotation("w", 0.1)
    with pytest.raises(ValueError):
        ChannelPrior.rotation("x", 0.1, -1.0)
    with pytest.raises(ValueError):
        PriorSpec(ChannelPrior.exact("zero"), ChannelPrior.exact("zero"), {}, fiducials=(("Gx",),))


@pytest.mark.parametrize("spec", [ramsey.ramsey_prior(), lsgst.lsgst_prior(), rb.rb_prior(),
                                  statetomo.statetomo_prior()])
def test_spec_round_trip_reproduces_samples(spec):
    again = PriorSpec.from_dict(spec.to_dict())
    a = spec.sample_gateset(np.random.default_rng(5))
    b = again.sample_gateset(np.random.default_rng(5))
    assert np.array_equal(a.rho, b.rho)
    for k in a.gates:
        assert np.array_equal(a.gates[k], b.gates[k])


def test_exact_spec_is_point_mass(rng):
    gs = lsgst.ideal_gateset()
    spec = exact_spec(gs, lsgst.FIDUCIALS)
    sample = spec.sample_gateset(rng)
    assert np.array_equal(sample.gates["Gx"], gs.gates["Gx"])
