"""Run orchestration for each CLI mode.

Every mode draws its randomness from named substreams of the config seed
(``truth``, ``prior``, ``sequences``, ``data``, ``resampling``), so adding
or removing one consumer never shifts another's stream, and identical
configs give byte-identical artifacts.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig
from .dynamics import (LindbladCoefficients, close_fiducial_algebra, closed_instance,
                       direct_trajectory, evolve_closed, fiducial_superops, finite_difference_edot,
                       learn_alpha, op_state_vector, taylor_remainder_bound, taylor_truncation_order)
from .gateset import GateSet
from .oprep import build_operational_rep
from .priors import PriorSpec
from .protocols import lsgst, ramsey, rb, statetomo
from .protocols.design import ExperimentDesign
from .seeding import substream
from .smc import (LIU_WEST_A, RESAMPLE_THRESHOLD, Datum, effective_sample_size, induce_operational_prior,
                  predict_many, prediction_loss, update_all)

log = logging.getLogger(__name__)


def _range(value, name: str) -> range:
    lo, hi = value
    if int(lo) > int(hi):
        raise ValueError(f"{name}: empty range {value!r}")
    return range(int(lo), int(hi) + 1)


# -- protocol builders ---------------------------------------------------------

def build_prior(cfg: RunConfig) -> PriorSpec:
    params = dict(cfg.prior)
    if "gates" in params:
        return PriorSpec.from_dict(params)
    try:
        if cfg.protocol == "ramsey":
            for key in ("omega_range", "spam_depol"):
                if key in params:
                    params[key] = tuple(params[key])
            return ramsey.ramsey_prior(**params)
        if cfg.protocol == "lsgst":
            return lsgst.lsgst_prior(**params)
        if cfg.protocol == "rb":
            return rb.rb_prior(**params)
        if cfg.protocol == "statetomo":
            if "depol" in params:
                params["depol"] = tuple(params["depol"])
            return statetomo.statetomo_prior(**params)
    except TypeError as exc:
        raise ValueError(f"prior: {exc}") from None
    raise ValueError(f"prior: protocol {cfg.protocol!r} has no prior")


def build_design(cfg: RunConfig, rng: np.random.Generator) -> ExperimentDesign:
    params = dict(cfg.design)
    if "training" in params:
        return ExperimentDesign.from_dict(params)
    try:
        if cfg.protocol == "ramsey":
            for key in ("n_train", "n_test"):
                if key in params:
                    params[key] = _range(params[key], f"design.{key}")
            return ramsey.ramsey_design(**params)
        if cfg.protocol == "lsgst":
            if "m_values" in params:
                params["m_values"] = _range(params["m_values"], "design.m_values")
            return lsgst.germ_design(**params)
        if cfg.protocol == "rb":
            lo, hi = params.pop("length_range", (40, 60))
            n = params.pop("count", 100)
            return rb.rb_design(rb.build_clifford_table(), rng, rb.training_lengths(n, lo, hi), **params)
        if cfg.protocol == "statetomo":
            for key in ("train_range", "test_range"):
                if key in params:
                    params[key] = tuple(params[key])
            return statetomo.statetomo_design(rng, **params)
    except TypeError as exc:
        raise ValueError(f"design: {exc}") from None
    raise ValueError(f"design: protocol {cfg.protocol!r} has no design")


def build_truth(cfg: RunConfig, spec: PriorSpec, rng: np.random.Generator) -> GateSet:
    truth = cfg.truth
    kind = truth.get("kind", "reference" if cfg.protocol == "ramsey" else "prior-sample")
    params = dict(truth.get("params", {}))
    if kind == "gateset":
        return io.gateset_from_dict(truth["gateset"])
    if kind == "prior-sample":
        return spec.sample_gateset(rng)
    if kind == "reference":
        if cfg.protocol != "ramsey":
            raise ValueError(f"truth.kind: no reference gate set for protocol {cfg.protocol!r}")
        return ramsey.ramsey_gateset(**params)
    # ideal
    if cfg.protocol == "ramsey":
        params.setdefault("omega", ramsey.TRUE_OMEGA)
        return ramsey.ramsey_gateset(omega=params["omega"], rx_error=0.0, rho_depol=0.0, effect_depol=0.0)
    if cfg.protocol == "lsgst":
        return lsgst.ideal_gateset()
    if cfg.protocol == "rb":
        return rb.ideal_gateset()
    raise ValueError(f"truth.kind: no ideal gate set for protocol {cfg.protocol!r}")


def _inference_kwargs(cfg: RunConfig) -> dict:
    return {
        "threshold": float(cfg.inference.get("resample_threshold", RESAMPLE_THRESHOLD)),
        "a": float(cfg.inference.get("liu_west_a", LIU_WEST_A)),
    }


def _prediction_rows(label, sequences, bme, var, truth: GateSet | None):
    rows = []
    for s, b, v in zip(sequences, bme, var):
        row = [label, s, float(b), float(v)]
        if truth is not None:
            p = float(np.clip(truth.probability(s), 0.0, 1.0))
            row += [p, float(prediction_loss(b, p))]
        rows.append(row)
    return rows


# -- modes ---------------------------------------------------------------------

def run_simulate(cfg: RunConfig, out: Path) -> dict:
    spec = build_prior(cfg)
    truth = build_truth(cfg, spec, substream(cfg.seed, "truth"))
    design = build_design(cfg, substream(cfg.seed, "sequences"))
    data_rng = substream(cfg.seed, "data")
    training = design.simulate(truth, data_rng, "training")
    testing = design.simulate(truth, data_rng, "testing")
    io.save_json(out / "truth.json", io.gateset_to_dict(truth))
    io.save_json(out / "design.json", design.to_dict())
    io.write_dataset(out / "training.txt", training, design.buttons, f"simulate seed={cfg.seed}")
    io.write_dataset(out / "testing.txt", testing, design.buttons, f"simulate seed={cfg.seed}")
    rows = [[which, s, float(np.clip(truth.probability(s), 0.0, 1.0))]
            for which, seqs in (("training", design.training_sequences), ("testing", design.testing_sequences))
            for s in seqs]
    io.write_csv(out / "probabilities.csv", ["set", "sequence", "probability"], rows)
    return {"training": len(training), "testing": len(testing)}


def run_infer(cfg: RunConfig, out: Path) -> dict:
    spec = build_prior(cfg)
    design = build_design(cfg, substream(cfg.seed, "sequences"))
    truth = None
    if cfg.dataset:
        data = list(io.read_dataset(cfg.dataset))
        testing_data: list[Datum] = []
    else:
        truth = build_truth(cfg, spec, substream(cfg.seed, "truth"))
        data_rng = substream(cfg.seed, "data")
        data = design.simulate(truth, data_rng, "training")
        testing_data = design.simulate(truth, data_rng, "testing") if design.testing else []
    prior = induce_operational_prior(spec, cfg.particles, substream(cfg.seed, "prior"))
    resampling = substream(cfg.seed, "resampling")
    cloud, infos = update_all(prior, data, resampling, **_inference_kwargs(cfg))
    io.save_checkpoint(out / "posterior.json", cloud, resampling,
                       {"protocol": cfg.protocol, "seed": cfg.seed})
    io.write_csv(out / "updates.csv", ["index", "sequence", "ess", "resampled", "log_evidence"],
                 [[i, d.sequence, u.ess, int(u.resampled), u.log_evidence]
                  for i, (d, u) in enumerate(zip(data, infos))])
    header = ["set", "sequence", "bme", "variance"] + (["true_probability", "quadratic_loss"] if truth else [])
    rows = []
    summary = []
    for label, seqs in (("training", design.training_sequences), ("testing", design.testing_sequences)):
        if not seqs:
            continue
        bme, var = predict_many(cloud, seqs)
        rows += _prediction_rows(label, seqs, bme, var, truth)
        if truth is not None:
            p = np.clip([truth.probability(s) for s in seqs], 0.0, 1.0)
            summary.append([label, len(seqs), float(np.mean(prediction_loss(bme, p))),
                            float(np.mean(prediction_loss(bme, p, "kl")))])
    io.write_csv(out / "predictions.csv", header, rows)
    if summary:
        io.write_csv(out / "losses.csv", ["set", "count", "mean_quadratic", "mean_kl"], summary)
    result = {"updates": len(infos), "resamples": int(sum(u.resampled for u in infos))}
    if cfg.protocol == "ramsey":
        result.update(_ramsey_report(cfg, cloud, design, truth, out))
    if cfg.protocol == "lsgst" and testing_data:
        references = [("empirical", testing_data)]
        if truth is not None:
            references.append(("true", {s: float(np.clip(truth.probability(s), 0.0, 1.0))
                                        for s in design.testing_sequences}))
        rows = []
        for name, ref in references:
            rows.append([name, "prior_mean", lsgst.tvd_total(design, lsgst.mean_estimate(prior), ref)])
            rows.append([name, "posterior", lsgst.tvd_total(design, cloud, ref)])
        io.write_csv(out / "tvd.csv", ["reference", "estimate", "total_tvd"], rows)
        result.update({f"tvd_{r}_{e}": v for r, e, v in rows})
    return result


def _ramsey_report(cfg, cloud, design, truth, out: Path) -> dict:
    n_values = [s.count("dt") for s in design.training_sequences + design.testing_sequences]
    seqs = design.training_sequences + design.testing_sequences
    bme, _ = predict_many(cloud, seqs)
    fit = ramsey.fit_ramsey_frequency(np.column_stack([n_values, bme]))
    rows = [["posterior", fit.omega, fit.amplitude, fit.offset, fit.residual]]
    if truth is not None:
        p = np.clip([truth.probability(s) for s in seqs], 0.0, 1.0)
        ref = ramsey.fit_ramsey_frequency(np.column_stack([n_values, p]))
        rows.append(["truth", ref.omega, ref.amplitude, ref.offset, ref.residual])
    io.write_csv(out / "ramsey_fit.csv", ["source", "omega", "amplitude", "offset", "residual"], rows)
    return {"omega": fit.omega}


def run_rb(cfg: RunConfig, out: Path) -> dict:
    table = rb.build_clifford_table()
    spec = build_prior(cfg)
    truth = build_truth(cfg, spec, substream(cfg.seed, "truth"))
    design = build_design(cfg, substream(cfg.seed, "sequences"))
    data = design.simulate(truth, substream(cfg.seed, "data"))
    prior = induce_operational_prior(spec, cfg.particles, substream(cfg.seed, "prior"))
    resampling = substream(cfg.seed, "resampling")
    cloud, _ = update_all(prior, data, resampling, **_inference_kwargs(cfg))
    opts = cfg.rb
    lo, hi = opts.get("length_range", (10, 252))
    lengths = rb.test_lengths(int(opts.get("test_lengths", 87)), int(lo), int(hi))
    tests = rb.rb_test_sequences(table, substream(cfg.seed, "sequences", "test"), lengths,
                                 int(opts.get("per_length", 20)))
    surv = rb.rb_survival(cloud, table, tests)
    fit = rb.fit_survival(surv)
    ci = rb.rb_credible_interval(rb.fit_per_hypothesis(surv), cloud.weights, float(opts.get("level", 0.95)))
    true_surv = rb.rb_survival(truth, table, tests)
    true_fit = rb.fit_decay(np.column_stack([true_surv.lengths, true_surv.mean, surv.variance]))
    io.save_checkpoint(out / "posterior.json", cloud, resampling, {"protocol": "rb", "seed": cfg.seed})
    io.write_csv(out / "survival.csv", ["m", "mean", "variance", "true_mean"],
                 [[int(m), float(a), float(b), float(c)]
                  for m, a, b, c in zip(surv.lengths, surv.mean, surv.variance, true_surv.mean)])
    rows = [[name, float(getattr(fit, name) if name != "fidelity" else fit.fidelity), *ci[name],
             float(getattr(true_fit, name) if name != "fidelity" else true_fit.fidelity)]
            for name in ("A", "B", "p", "fidelity")]
    io.write_csv(out / "decay_fit.csv", ["parameter", "estimate", "lower", "upper", "true"], rows)
    lo_f, hi_f = ci["fidelity"]
    return {"fidelity": fit.fidelity, "interval": (lo_f, hi_f), "true_fidelity": true_fit.fidelity,
            "contains_truth": bool(lo_f <= true_fit.fidelity <= hi_f)}


def run_statetomo(cfg: RunConfig, out: Path) -> dict:
    spec = build_prior(cfg)
    n_states = int(cfg.statetomo.get("states", 200))
    kwargs = _inference_kwargs(cfg)
    rows = []
    for i in range(n_states):
        truth = build_truth(cfg, spec, substream(cfg.seed, "truth", i))
        design = build_design(cfg, substream(cfg.seed, "sequences", i))
        data_rng = substream(cfg.seed, "data", i)
        fid = naive_fiducial_data(truth, design.training[0][1], data_rng)
        naive = statetomo.bloch_from_probabilities(*[d.successes / d.trials for d in fid])
        cloud = induce_operational_prior(spec, cfg.particles, substream(cfg.seed, "prior", i))
        cloud, _ = update_all(cloud, fid + design.simulate(truth, data_rng), substream(cfg.seed, "resampling", i),
                              **kwargs)
        post = statetomo.pseudo_bloch(cloud.mean_rep())
        true = statetomo.bloch_vector(truth.rho)
        rows.append([i, float(true[0]), float(true[2]), *map(float, naive), *map(float, post),
                     float(np.linalg.norm(naive - true)), float(np.linalg.norm(post - true))])
    io.write_csv(out / "pseudo_bloch.csv",
                 ["state", "true_x", "true_z", "naive_x", "naive_y", "naive_z", "post_x", "post_y", "post_z",
                  "naive_distance", "post_distance"], rows)
    arr = np.array(rows)
    summary = {
        "states": n_states,
        "mean_naive_distance": float(arr[:, 9].mean()),
        "mean_post_distance": float(arr[:, 10].mean()),
        "naive_out_of_disk": int(np.sum(np.hypot(arr[:, 3], arr[:, 5]) > 1.0)),
        "mean_abs_naive_y": float(np.abs(arr[:, 4]).mean()),
        "mean_abs_post_y": float(np.abs(arr[:, 7]).mean()),
    }
    io.write_csv(out / "statetomo_summary.csv", ["quantity", "value"], sorted(summary.items()))
    return summary


def naive_fiducial_data(truth: GateSet, shots: int, rng: np.random.Generator) -> list[Datum]:
    """Counts for the fiducial experiments ``()``, ``(Rx)``, ``(Ry)``."""
    return [Datum(s, shots, int(rng.binomial(shots, float(np.clip(truth.probability(s), 0.0, 1.0)))))
            for s in statetomo.FIDUCIALS[:3]]


def run_dynamics(cfg: RunConfig, out: Path) -> dict:
    opts = cfg.dynamics
    rng = substream(cfg.seed, "truth")
    gs, fiducials = closed_instance(rng, "pauli", conjugate=bool(opts.get("conjugate", False)))
    fs = fiducial_superops(gs, fiducials)
    algebra = close_fiducial_algebra(fs)
    rates = np.asarray(opts.get("rates", rng.uniform(0.0, 1.0, len(fiducials) - 1)), dtype=float)
    if rates.shape != (len(fiducials) - 1,) or np.any(rates < 0):
        raise ValueError(f"dynamics.rates: need {len(fiducials) - 1} nonnegative rates")
    # random-unitary (Pauli) noise: L = sum_l g_l (F_l - 1)
    alpha = np.concatenate([[-rates.sum()], rates])
    lindblad = LindbladCoefficients(alpha).generator(fs)
    times = np.linspace(0.0, float(opts.get("t_max", 1.0)), int(opts.get("points", 11)))
    psi0 = op_state_vector(gs, fiducials)
    traj = evolve_closed(psi0, algebra, alpha, times)
    ref = direct_trajectory(gs, fiducials, lindblad, times)
    io.write_trajectory(out / "trajectory.csv", times, traj)
    deviation = float(max(np.max(np.abs(a.psi - b.psi)) for a, b in zip(traj, ref)))
    rep = build_operational_rep(gs, fiducials)
    e_dot = finite_difference_edot(gs, lindblad, fiducials, float(opts.get("delta", 1e-6)))
    learned = learn_alpha(e_dot, rep.f_tilde)
    io.write_csv(out / "alpha.csv", ["fiducial", "true", "learned"],
                 [[f, float(a), float(b)] for f, a, b in zip(fiducials, alpha, learned.alpha)])
    eps = float(opts.get("eps", 1e-6))
    step = float(times[1] - times[0]) if len(times) > 1 else 1.0
    k = taylor_truncation_order(alpha, step, eps)
    k_rig = taylor_truncation_order(alpha, step, eps, rigorous=True)
    io.write_csv(out / "taylor.csv", ["eps", "delta", "order", "rigorous_order", "remainder_bound"],
                 [[eps, step, k, k_rig, taylor_remainder_bound(alpha, step, k_rig)]])
    return {"max_deviation": deviation, "alpha_residual": learned.residual, "order": k}


MODES = {
    "simulate": run_simulate,
    "infer": run_infer,
    "rb": run_rb,
    "statetomo": run_statetomo,
    "dynamics": run_dynamics,
}


def run(cfg: RunConfig) -> dict:
    """Execute ``cfg`` and write its artifacts under ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.save_json(out / "config.json", cfg.to_dict())
    result = MODES[cfg.mode](cfg, out)
    io.save_json(out / "summary.json", {"mode": cfg.mode, "protocol": cfg.protocol, **result})
    return result


def report(out_dir) -> dict:
    """Summarize a finished run directory from its posterior checkpoint."""
    out = Path(out_dir)
    cloud, _, extra = io.load_checkpoint(out / "posterior.json")
    mean = cloud.mean_rep()
    rows = [[name, float(v)] for name, v in zip(_parameter_names(cloud.pmap), mean.minimal)]
    io.write_csv(out / "posterior_mean.csv", ["parameter", "value"], rows)
    io.save_json(out / "posterior_rep.json", io.rep_to_dict(mean))
    info = {"particles": len(cloud), "ess": float(effective_sample_size(cloud)),
            "updates": cloud.n_updates, **extra}
    io.save_json(out / "report.json", info)
    return info


def _parameter_names(pmap) -> list[str]:
    """Name each minimal parameter after the first raw entry that uses it."""
    names: dict[int, str] = {}
    for kind, idx, slot in pmap.entries():
        names.setdefault(slot, kind + "[" + ";".join(map(str, idx)) + "]")
    return [names[i] for i in range(pmap.n_params)]
