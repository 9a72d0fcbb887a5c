"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from oqt import channels as ch
from oqt import dynamics as dyn
from oqt import io, runner
from oqt.config import parse_config
from oqt.gateset import gauge_transform
from oqt.oprep import build_operational_rep, minimal_parameterization
from oqt.protocols import lsgst, ramsey, rb
from oqt.smc import ParticleCloud, bayes_risk, induce_operational_prior, posterior_mean

from conftest import noisy_gateset, random_gateset, random_gauge, random_sequence, record

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run_config(name: str, tmp_path) -> tuple[dict, Path]:
    cfg = parse_config(CONFIGS / f"{name}.json")
    out = tmp_path / name
    return runner.run(cfg.with_overrides(output_dir=str(out))), out


def test_criterion_01_gauge_invariance():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        gs = random_gateset(rng)
        seqs = [random_sequence(rng, gs.labels, 15) for _ in range(50)]
        p = np.array([gs.probability(s) for s in seqs])
        for _ in range(20):
            moved = gauge_transform(gs, random_gauge(rng))
            q = np.array([moved.probability(s) for s in seqs])
            worst = max(worst, float(np.max(np.abs(p - q))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 30
    record(1, ok, f"max |dPr| = {worst:.2e} (< 1e-9), {elapsed:.1f} s (< 30 s)")
    assert ok


def test_criterion_02_operational_rep_equivalence():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(1000):
        gs = noisy_gateset(rng)
        rep = build_operational_rep(gs, lsgst.FIDUCIALS)
        s = random_sequence(rng, gs.labels, 20)
        worst = max(worst, abs(rep.probability(s) - gs.probability(s)))
    ok = worst < 1e-8
    record(2, ok, f"max |trace formula - Born rule| = {worst:.2e} over 1000 pairs (< 1e-8)")
    assert ok


def test_criterion_03_parameter_dedup():
    pmap = minimal_parameterization(ramsey.BUTTONS, ramsey.FIDUCIALS)
    ok = (pmap.n_raw, pmap.n_params) == (52, 27)
    record(3, ok, f"Ramsey raw entries {pmap.n_raw} (52), minimal parameters {pmap.n_params} (27)")
    assert ok


@pytest.mark.slow
def test_criterion_04_ramsey(tmp_path):
    t0 = time.perf_counter()
    result, out = run_config("ramsey", tmp_path)
    elapsed = time.perf_counter() - t0
    omega_true = ramsey.TRUE_OMEGA
    rel = abs(result["omega"] - omega_true) / omega_true
    header, rows = io.read_csv(out / "predictions.csv")
    test_rows = [r for r in rows if r[0] == "testing"]
    n = [r[1].count("dt") for r in test_rows]
    var = [float(r[header.index("variance")]) for r in test_rows]
    loss = float(np.mean([float(r[header.index("quadratic_loss")]) for r in test_rows]))
    rho = spearmanr(n, var).statistic
    ok = rel < 0.02 and loss < 1e-2 and rho > 0.5 and elapsed < 600
    record(4, ok, f"omega_hat = {result['omega']:.6f} vs {omega_true} ({100 * rel:.3f}% < 2%), "
                  f"test loss {loss:.2e} (< 1e-2), Spearman(var, n) = {rho:.3f} (> 0.5), {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_05_randomized_benchmarking(tmp_path):
    table = rb.build_clifford_table()
    rng = np.random.default_rng(105)
    tests = rb.rb_test_sequences(table, rng, rb.test_lengths(), per_length=20)
    ideal = rb.ideal_gateset()
    direct = rb.rb_survival(ideal, table, tests)
    rep = build_operational_rep(ideal, rb.FIDUCIALS)
    cloud = ParticleCloud(rep.pmap, rep.minimal[None], dim=2)
    via_rep = rb.rb_survival(cloud, table, tests)
    dev = float(max(np.max(np.abs(direct.mean - 1)), np.max(np.abs(via_rep.mean - 1))))
    fit = rb.fit_decay(np.column_stack([direct.lengths, direct.mean, np.full(len(direct.lengths), 1e-4)]))
    prop_ok = dev < 1e-12 and abs(fit.p - 1) < 1e-6

    result, _ = run_config("rb", tmp_path)
    lo, hi = result["interval"]
    width = hi - lo
    fitted_inside = lo <= result["fidelity"] <= hi
    ok = prop_ok and fitted_inside and result["contains_truth"] and width < 0.002
    record(5, ok, f"fitted F_ave {result['fidelity']:.6f} and true {result['true_fidelity']:.6f} "
                  f"in [{lo:.6f}, {hi:.6f}]: {fitted_inside}/{result['contains_truth']}, "
                  f"width {width:.2e} (< 2e-3); perfect Cliffords |P(m) - 1| = {dev:.1e}, p = {fit.p:.8f}")
    assert ok


def test_criterion_06_clifford_table():
    t = rb.build_clifford_table()
    closes = all(np.allclose(t.elements[i] @ t.elements[j], t.elements[t.products[i, j]], atol=1e-10)
                 for i in range(24) for j in range(24))
    inverses = all(t.products[i, t.inverses[i]] == t.identity and t.products[t.inverses[i], i] == t.identity
                   for i in range(24))
    ok = len(t) == 24 and closes and inverses
    record(6, ok, f"{len(t)} elements (24), products close: {closes}, inverses verified: {inverses}")
    assert ok


def test_criterion_07_dynamics():
    rng = np.random.default_rng(107)
    t0 = time.perf_counter()
    times = np.linspace(0, 1, 21)
    worst = 0.0
    bound_ok = True
    for i in range(20):
        kind = "pauli" if i % 2 == 0 else "cyclic"
        gs, fids = dyn.closed_instance(rng, kind, order=int(rng.integers(2, 6)), conjugate=True)
        fs = dyn.fiducial_superops(gs, fids)
        alg = dyn.close_fiducial_algebra(fs)
        assert alg.closed
        rates = rng.uniform(0.0, 1.0, len(fids) - 1)
        alpha = np.concatenate([[-rates.sum()], rates])
        lind = np.einsum("l,lij->ij", alpha, fs)
        got = dyn.evolve_closed(dyn.op_state_vector(gs, fids), alg, alpha, times)
        ref = dyn.direct_trajectory(gs, fids, lind, times)
        worst = max(worst, max(float(np.max(np.abs(a.psi - b.psi))) for a, b in zip(got, ref)))
        delta = times[1] - times[0]
        for eps in (1e-3, 1e-6, 1e-9):
            k = dyn.taylor_truncation_order(alpha, delta, eps)
            bound_ok &= dyn.truncation_bound(np.sum(np.abs(alpha)) * delta, k) <= eps
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and bound_ok and elapsed < 60
    record(7, ok, f"max deviation {worst:.2e} (< 1e-6) on 20 instances, Taylor bound holds: {bound_ok}, "
                  f"{elapsed:.1f} s (< 60 s)")
    assert ok


@pytest.mark.slow
def test_criterion_08_state_tomography(tmp_path):
    result, _ = run_config("statetomo", tmp_path)
    out_of_disk = result["naive_out_of_disk"]
    ok = (result["states"] == 200 and result["mean_abs_naive_y"] > 0 and out_of_disk > 0
          and result["mean_post_distance"] < result["mean_naive_distance"])
    record(8, ok, f"naive mean |y| {result['mean_abs_naive_y']:.3f}, out-of-disk {out_of_disk}/200, "
                  f"mean distance naive {result['mean_naive_distance']:.4f} -> posterior "
                  f"{result['mean_post_distance']:.4f}")
    assert ok


@pytest.mark.slow
def test_criterion_09_lsgst(tmp_path):
    result, _ = run_config("lsgst", tmp_path)
    prior, post = result["tvd_true_prior_mean"], result["tvd_true_posterior"]
    ok = post < 0.5 * prior
    record(9, ok, f"total TVD on 42 testing sequences: prior mean {prior:.4f}, posterior {post:.4f} "
                  f"(ratio {post / prior:.3f} < 0.5)")
    assert ok


def test_criterion_10_bayes_estimator():
    rng = np.random.default_rng(110)
    specs = [ramsey.ramsey_prior(), lsgst.lsgst_prior(1e-2, 1e-2), rb.rb_prior()]
    violations = 0
    margin = np.inf
    for i in range(20):
        cloud = induce_operational_prior(specs[i % 3], 100, rng)
        cloud = cloud.with_weights(rng.dirichlet(np.full(len(cloud), 0.5)))
        best = bayes_risk(cloud, posterior_mean(cloud))
        for _ in range(100):
            candidate = rng.dirichlet(np.full(len(cloud), 0.2)) @ cloud.particles
            risk = bayes_risk(cloud, candidate)
            violations += best > risk
            margin = min(margin, risk - best)
    ok = violations == 0
    record(10, ok, f"posterior mean risk <= candidate risk in {2000 - violations}/2000 trials "
                   f"(smallest margin {margin:.2e})")
    assert ok
