"""Sequential Monte Carlo inference over minimal operational parameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy.special import xlogy

from .gateset import Sequence
from .oprep import (
    OperationalModel,
    OperationalRep,
    ParameterMap,
    build_operational_rep,
    clip_probabilities,
    compile_model,
    informational_completeness,
)
from .priors import PriorSpec

RESAMPLE_THRESHOLD = 0.5
LIU_WEST_A = 0.98
MAX_REJECTIONS = 1000
KL_FLOOR = 1e-12


class InferenceFailure(RuntimeError):
    """All particle weights vanished; the data have zero likelihood under the cloud."""

    def __init__(self, message: str, update_index: int | None = None, sequence: Sequence | None = None):
        super().__init__(message)
        self.update_index = update_index
        self.sequence = sequence


@dataclass(frozen=True)
class Datum:
    """``successes`` out of ``trials`` runs of ``sequence``."""

    sequence: Sequence
    trials: int
    successes: int

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(self.sequence))
        if int(self.trials) != self.trials or int(self.successes) != self.successes:
            raise ValueError("counts must be integers")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "successes", int(self.successes))
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.successes <= self.trials:
            raise ValueError(f"successes must lie in [0, {self.trials}], got {self.successes}")


class ParticleCloud:
    """Weighted particles over the minimal parameters of one template.

    The compiled transfer matrices are cached and shared between clouds that
    differ only in their weights, so reweighting never recompiles.
    """

    def __init__(self, pmap: ParameterMap, particles, weights=None, dim: int = 2,
                 n_updates: int = 0, _model: OperationalModel | None = None):
        particles = np.array(particles, dtype=float, ndmin=2)
        n, p = particles.shape
        if n < 1:
            raise ValueError("need at least one particle")
        if p != pmap.n_params:
            raise ValueError(f"particles have {p} parameters, template has {pmap.n_params}")
        if weights is None:
            weights = np.full(n, 1.0 / n)
        weights = np.array(weights, dtype=float)
        if weights.shape != (n,) or np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be a finite nonnegative vector, one per particle")
        total = weights.sum()
        if total <= 0:
            raise ValueError("weights sum to zero")
        particles.setflags(write=False)
        self.pmap = pmap
        self.particles = particles
        self.weights = weights / total
        self.weights.setflags(write=False)
        self.dim = dim
        self.n_updates = n_updates
        self._model = _model

    def __len__(self) -> int:
        return self.particles.shape[0]

    @property
    def n_params(self) -> int:
        return self.particles.shape[1]

    @property
    def model(self) -> OperationalModel:
        if self._model is None:
            self._model = compile_model(self.pmap, self.particles, self.dim)
        return self._model

    def with_weights(self, weights, n_updates: int | None = None) -> "ParticleCloud":
        return ParticleCloud(self.pmap, self.particles, weights, self.dim,
                             self.n_updates if n_updates is None else n_updates, self._model)

    def probabilities(self, sequences, clip: bool = True) -> np.ndarray:
        """Per-particle probabilities, shape ``(N, len(sequences))``."""
        return self.model.probabilities([tuple(s) for s in sequences], clip=clip)

    def rep(self, i: int) -> OperationalRep:
        return OperationalRep(self.pmap, self.particles[i], self.dim)

    def mean_rep(self) -> OperationalRep:
        return OperationalRep(self.pmap, posterior_mean(self), self.dim)

    def to_dict(self) -> dict:
        return {
            "template": self.pmap.to_dict(),
            "dim": self.dim,
            "particles": self.particles.tolist(),
            "weights": self.weights.tolist(),
            "n_updates": self.n_updates,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParticleCloud":
        return cls(ParameterMap.from_dict(d["template"]), d["particles"], d["weights"],
                   d.get("dim", 2), d.get("n_updates", 0))


# -- prior induction -----------------------------------------------------------

def induce_operational_prior(spec: PriorSpec, n: int, rng: np.random.Generator,
                             max_rejections: int = MAX_REJECTIONS) -> ParticleCloud:
    """Sample gate sets from ``spec`` and store their operational representations.

    Draws whose ``F~`` has rank below ``d**2`` are discarded and redrawn.

    Raises
    ------
    ValueError
        If more than ``max_rejections`` consecutive draws are rank deficient.
    """
    if n < 1:
        raise ValueError("need at least one particle")
    rows = []
    pmap = None
    dim = None
    rejected = 0
    while len(rows) < n:
        rep = build_operational_rep(spec.sample_gateset(rng), spec.fiducials, spec.meas_fiducials)
        if informational_completeness(rep).complete:
            rows.append(rep.minimal)
            pmap, dim = rep.pmap, rep.dim
            rejected = 0
            continue
        rejected += 1
        if rejected > max_rejections:
            raise ValueError(f"{rejected} consecutive prior draws had rank-deficient F~; "
                             "the fiducials are not informationally complete under this prior")
    return ParticleCloud(pmap, np.array(rows), dim=dim)


# -- updates -------------------------------------------------------------------

def effective_sample_size(cloud_or_weights) -> float:
    w = cloud_or_weights.weights if isinstance(cloud_or_weights, ParticleCloud) else np.asarray(cloud_or_weights)
    return float(1.0 / np.sum(w**2))


def log_likelihood(p, trials: int, successes: int) -> np.ndarray:
    """Binomial log-likelihood up to the ``log C(K, k)`` constant, with ``p`` clipped."""
    p = clip_probabilities(p)
    return xlogy(successes, p) + xlogy(trials - successes, 1.0 - p)


@dataclass(frozen=True)
class UpdateInfo:
    ess: float
    resampled: bool
    log_evidence: float  # log of the normalizer, without the binomial coefficient


def _reweight(weights: np.ndarray, loglik: np.ndarray) -> tuple[np.ndarray, float] | None:
    with np.errstate(divide="ignore"):
        logw = np.log(weights) + loglik
    top = np.max(logw)
    if not np.isfinite(top):
        return None
    w = np.exp(logw - top)
    total = w.sum()
    return w / total, float(top + np.log(total))


def bayes_update(cloud: ParticleCloud, datum: Datum, rng: np.random.Generator | None = None,
                 resample: bool = True, threshold: float = RESAMPLE_THRESHOLD,
                 a: float = LIU_WEST_A) -> tuple[ParticleCloud, UpdateInfo]:
    """Multiply weights by the binomial likelihood of ``datum`` and renormalize.

    Resamples (Liu-West) when the effective sample size drops below
    ``threshold * N``; that requires ``rng``.

    Raises
    ------
    InferenceFailure
        If every particle assigns the datum zero likelihood.
    """
    p = cloud.probabilities([datum.sequence])[:, 0]
    return _apply(cloud, datum, p, rng, resample, threshold, a)


def _apply(cloud, datum, p, rng, resample, threshold, a):
    out = _reweight(cloud.weights, log_likelihood(p, datum.trials, datum.successes))
    if out is None:
        raise InferenceFailure(
            f"all particle weights vanished at update {cloud.n_updates} "
            f"(sequence {datum.sequence!r}, {datum.successes}/{datum.trials})",
            cloud.n_updates, datum.sequence)
    w, log_z = out
    new = cloud.with_weights(w, cloud.n_updates + 1)
    ess = effective_sample_size(w)
    resampled = False
    if resample and ess < threshold * len(cloud):
        if rng is None:
            raise ValueError("resampling needs an rng")
        new = liu_west_resample(new, rng, a)
        resampled = True
    return new, UpdateInfo(ess, resampled, log_z)


def update_all(cloud: ParticleCloud, data: Iterable[Datum], rng: np.random.Generator | None = None,
               resample: bool = True, threshold: float = RESAMPLE_THRESHOLD,
               a: float = LIU_WEST_A, callback=None) -> tuple[ParticleCloud, list[UpdateInfo]]:
    """Apply :func:`bayes_update` to each datum in order.

    Likelihoods of the remaining data are evaluated in one batch and reused
    until a resampling step moves the particles.
    """
    data = list(data)
    infos: list[UpdateInfo] = []
    start = 0
    while start < len(data):
        probs = cloud.probabilities([d.sequence for d in data[start:]])
        for j, datum in enumerate(data[start:]):
            cloud, info = _apply(cloud, datum, probs[:, j], rng, resample, threshold, a)
            infos.append(info)
            if callback is not None:
                callback(cloud, info)
            if info.resampled:
                start += j + 1
                break
        else:
            start = len(data)
    return cloud, infos


def liu_west_resample(cloud: ParticleCloud, rng: np.random.Generator, a: float = LIU_WEST_A) -> ParticleCloud:
    """Draw ``N`` particles by weight and shrink/jitter them towards the mean.

    Each survivor ``x`` moves to ``a x + (1 - a) mu + sqrt(1 - a^2) L z`` with
    ``L L^T`` the posterior covariance and ``z`` standard normal.  Weights are
    reset to uniform.  The covariance is factored through its eigen-
    decomposition, so rank-deficient (but finite) covariances are handled
    exactly; a non-finite covariance falls back to plain multinomial draws.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError("a must lie in (0, 1]")
    x = cloud.particles
    n = len(cloud)
    w = cloud.weights / cloud.weights.sum()
    idx = rng.choice(n, size=n, p=w)
    mu = posterior_mean(cloud)
    cov = posterior_covariance(cloud)
    if a == 1.0 or not np.all(np.isfinite(cov)):
        new = x[idx]
    else:
        vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
        noise = rng.standard_normal((n, x.shape[1])) @ factor.T
        new = a * x[idx] + (1.0 - a) * mu + np.sqrt(1.0 - a * a) * noise
    return ParticleCloud(cloud.pmap, new, None, cloud.dim, cloud.n_updates)


# -- estimators ----------------------------------------------------------------

def posterior_mean(cloud: ParticleCloud) -> np.ndarray:
    return cloud.weights @ cloud.particles


def posterior_covariance(cloud: ParticleCloud) -> np.ndarray:
    dx = cloud.particles - posterior_mean(cloud)
    return (cloud.weights[:, None] * dx).T @ dx


def bayes_risk(cloud: ParticleCloud, estimate) -> float:
    """Empirical quadratic Bayes risk ``sum_i w_i |x_i - estimate|^2``."""
    dx = cloud.particles - np.asarray(estimate, dtype=float)
    return float(cloud.weights @ np.sum(dx * dx, axis=1))


@dataclass(frozen=True)
class Prediction:
    bme: float
    variance: float


def predict_many(cloud: ParticleCloud, sequences) -> tuple[np.ndarray, np.ndarray]:
    """Bayes-mean predictions and their posterior variances for many sequences."""
    p = cloud.probabilities(sequences)
    bme = cloud.weights @ p
    var = cloud.weights @ (p - bme) ** 2
    return bme, var


def predict(cloud: ParticleCloud, s: Sequence) -> Prediction:
    bme, var = predict_many(cloud, [tuple(s)])
    return Prediction(float(bme[0]), float(var[0]))


def prediction_loss(p_hat, p_true, kind: str = "quadratic"):
    """Quadratic ``(p_hat - p)^2`` or two-outcome KL divergence ``D(p || p_hat)``."""
    p_hat = np.asarray(p_hat, dtype=float)
    p_true = np.asarray(p_true, dtype=float)
    if kind == "quadratic":
        out = (p_hat - p_true) ** 2
    elif kind == "kl":
        q = np.clip(p_hat, KL_FLOOR, 1.0 - KL_FLOOR)
        out = (xlogy(p_true, p_true) - xlogy(p_true, q)
               + xlogy(1 - p_true, 1 - p_true) - xlogy(1 - p_true, 1 - q))
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return float(out) if out.ndim == 0 else out


__all__ = [
    "Datum",
    "InferenceFailure",
    "ParticleCloud",
    "Prediction",
    "UpdateInfo",
    "bayes_risk",
    "bayes_update",
    "effective_sample_size",
    "induce_operational_prior",
    "liu_west_resample",
    "log_likelihood",
    "posterior_covariance",
    "posterior_mean",
    "predict",
    "predict_many",
    "prediction_loss",
    "update_all",
]
