from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oqt.oprep import minimal_parameterization
from oqt.priors import exact_spec
from oqt.protocols import lsgst, ramsey
from oqt.smc import (Datum, InferenceFailure, ParticleCloud, bayes_risk, bayes_update, effective_sample_size,
                     induce_operational_prior, liu_west_resample, log_likelihood, posterior_covariance,
                     posterior_mean, predict, predict_many, prediction_loss, update_all)


def toy_cloud(probs, weights=None):
    """Cloud over the single-fiducial template whose only entry is Pr(())."""
    pmap = minimal_parameterization(("G",), [()])
    # slots: E~_0 = F~_00 = Pr(()), G~ = Pr((G,))
    x = np.array([[p, p] for p in probs])
    return ParticleCloud(pmap, x, weights, dim=1)


def test_datum_validation():
    with pytest.raises(ValueError):
        Datum((), 0, 0)
    with pytest.raises(ValueError):
        Datum((), 3, 4)
    assert Datum(["a"], 2, 1).sequence == ("a",)


def test_toy_cloud_predicts_its_entry():
    cloud = toy_cloud([0.2, 0.8])
    assert np.allclose(cloud.probabilities([()])[:, 0], [0.2, 0.8])


def test_bayes_update_two_particles():
    cloud, info = bayes_update(toy_cloud([0.2, 0.8]), Datum((), 1, 1), resample=False)
    assert np.allclose(cloud.weights, [0.2, 0.8])
    assert info.log_evidence == pytest.approx(np.log(0.5))


def test_certain_datum_leaves_weights():
    cloud, _ = bayes_update(toy_cloud([1.0, 1.0, 1.0], [0.5, 0.3, 0.2]), Datum((), 1, 1), resample=False)
    assert np.allclose(cloud.weights, [0.5, 0.3, 0.2])


def test_all_weights_vanish_raises():
    with pytest.raises(InferenceFailure) as err:
        bayes_update(toy_cloud([0.0, 0.0]), Datum((), 3, 3), resample=False)
    assert err.value.update_index == 0 and err.value.sequence == ()


def test_likelihood_clips_probabilities():
    assert np.isfinite(log_likelihood(np.array([1.3, -0.2]), 2, 1)).sum() == 0
    assert log_likelihood(np.array([1.3]), 2, 2)[0] == 0.0


def test_effective_sample_size_examples():
    assert effective_sample_size(np.full(10, 0.1)) == pytest.approx(10)
    assert effective_sample_size(np.array([1.0, 0, 0])) == 1
    assert effective_sample_size(np.array([0.5, 0.5, 0, 0])) == pytest.approx(2)


@given(st.lists(st.floats(0.01, 0.99), min_size=2, max_size=8), st.integers(1, 20), st.data())
def test_weights_stay_normalized(probs, trials, data):
    k = data.draw(st.integers(0, trials))
    cloud, _ = bayes_update(toy_cloud(probs), Datum((), trials, k), resample=False)
    assert cloud.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(cloud.weights >= 0)


@given(st.floats(0.01, 0.99), st.integers(1, 5))
def test_uniform_likelihood_is_neutral(p, k):
    w = np.array([0.1, 0.2, 0.7])
    cloud, _ = bayes_update(toy_cloud([p, p, p], w), Datum((), 5, k), resample=False)
    assert np.allclose(cloud.weights, w, atol=1e-14)


@given(st.permutations(list(range(6))))
def test_updates_commute_without_resampling(order):
    data = [Datum((), 10, k) for k in (1, 3, 3, 7, 9, 10)]
    probs = np.linspace(0.05, 0.95, 7)
    a, _ = update_all(toy_cloud(probs), data, resample=False)
    b, _ = update_all(toy_cloud(probs), [data[i] for i in order], resample=False)
    assert np.allclose(a.weights, b.weights, atol=1e-12)


def test_resampling_needs_rng():
    with pytest.raises(ValueError):
        bayes_update(toy_cloud([0.01, 0.02, 0.99]), Datum((), 50, 50))


def test_induced_prior_from_exact_spec(rng):
    spec = exact_spec(lsgst.ideal_gateset(), lsgst.FIDUCIALS)
    cloud = induce_operational_prior(spec, 5, rng)
    assert np.ptp(cloud.particles, axis=0).max() == 0.0


def test_ramsey_prior_particles_are_probabilities(rng):
    cloud = induce_operational_prior(ramsey.ramsey_prior(), 200, rng)
    assert cloud.particles.shape == (200, 27)
    assert cloud.particles.min() >= -1e-12 and cloud.particles.max() <= 1 + 1e-12


def test_incomplete_fiducials_rejected(rng):
    spec = exact_spec(lsgst.ideal_gateset(), [()])
    with pytest.raises(ValueError):
        induce_operational_prior(spec, 2, rng, max_rejections=3)


def test_liu_west_with_a_one_copies_particles(rng):
    cloud = toy_cloud([0.1, 0.5, 0.9], [0.2, 0.3, 0.5])
    out = liu_west_resample(cloud, rng, a=1.0)
    rows = {tuple(r) for r in cloud.particles}
    assert all(tuple(r) in rows for r in out.particles)
    assert np.allclose(out.weights, 1 / 3)


def test_liu_west_degenerate_cloud_unchanged(rng):
    cloud = toy_cloud([0.4] * 5)
    out = liu_west_resample(cloud, rng)
    assert np.allclose(out.particles, cloud.particles, atol=1e-15)


def test_liu_west_preserves_mean_and_covariance():
    rng = np.random.default_rng(11)
    n = 4000
    x = rng.normal(size=(n, 2)) * [0.05, 0.02] + 0.5
    w = rng.dirichlet(np.ones(n))
    cloud = ParticleCloud(minimal_parameterization(("G",), [()]), x, w, dim=1)
    mu, cov = posterior_mean(cloud), posterior_covariance(cloud)
    shifts = []
    for _ in range(20):
        out = liu_west_resample(cloud, rng)
        shifts.append(posterior_mean(out) - mu)
    sigma = np.sqrt(np.diag(cov))
    assert np.all(np.abs(np.mean(shifts, axis=0)) < 5 * sigma / np.sqrt(n))
    assert np.allclose(np.diag(posterior_covariance(out)), np.diag(cov), rtol=0.15)


def test_estimators_small_clouds():
    one = toy_cloud([0.3])
    assert np.allclose(posterior_mean(one), [0.3, 0.3])
    two = toy_cloud([0.2, 0.6])
    assert np.allclose(posterior_mean(two), [0.4, 0.4])
    assert np.allclose(posterior_covariance(two), 0.04)


@given(st.integers(0, 2**32 - 1))
def test_posterior_mean_minimizes_bayes_risk(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(30, 2))
    cloud = ParticleCloud(minimal_parameterization(("G",), [()]), x, rng.dirichlet(np.ones(30)), dim=1)
    best = bayes_risk(cloud, posterior_mean(cloud))
    for _ in range(100):
        candidate = rng.dirichlet(np.ones(30)) @ x
        assert best <= bayes_risk(cloud, candidate)


def test_predictions():
    det = toy_cloud([0.7, 0.7])
    p = predict(det, ())
    assert p.bme == pytest.approx(0.7) and p.variance == pytest.approx(0.0)
    coin = toy_cloud([0.0, 1.0])
    p = predict(coin, ())
    assert p.bme == pytest.approx(0.5) and p.variance == pytest.approx(0.25)
    bme, var = predict_many(coin, [(), ()])
    assert bme.shape == (2,)


def test_prediction_loss_examples():
    assert prediction_loss(0.4, 0.4) == 0.0
    assert prediction_loss(0.4, 0.4, "kl") == pytest.approx(0.0, abs=1e-15)
    assert prediction_loss(0.6, 0.5) == pytest.approx(0.01)
    assert prediction_loss(0.5, 0.75, "kl") == pytest.approx(0.75 * np.log(1.5) + 0.25 * np.log(0.5))
    assert prediction_loss(0.5, 0.75, "kl") == pytest.approx(0.13081, abs=1e-5)
    with pytest.raises(ValueError):
        prediction_loss(0.1, 0.2, "hinge")


def test_cloud_serialization_round_trip(rng):
    cloud = induce_operational_prior(ramsey.ramsey_prior(), 10, rng)
    cloud, _ = bayes_update(cloud, Datum(ramsey.ramsey_sequence(3), 10, 4), resample=False)
    again = ParticleCloud.from_dict(cloud.to_dict())
    assert np.array_equal(again.particles, cloud.particles)
    assert np.array_equal(again.weights, cloud.weights)
    assert again.n_updates == 1


def test_update_all_is_deterministic_under_seed():
    spec = ramsey.ramsey_prior()
    truth = ramsey.ramsey_gateset()
    design = ramsey.ramsey_design(range(2, 12), range(12, 14), shots=200)
    results = []
    for _ in range(2):
        rng = np.random.default_rng(9)
        cloud = induce_operational_prior(spec, 300, rng)
        post, infos = update_all(cloud, design.simulate(truth, rng), rng)
        results.append(post.particles)
        assert len(infos) == 10
    assert np.array_equal(results[0], results[1])
