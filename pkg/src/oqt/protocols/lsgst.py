"""Long-sequence gate set tomography: germ designs, prior and TVD scoring."""

from __future__ import annotations

import numpy as np

from .. import channels as ch
from ..gateset import GateSet, Sequence, power
from ..priors import ChannelPrior, PriorSpec
from ..smc import ParticleCloud, posterior_mean, predict_many
from .design import ExperimentDesign

BUTTONS = ("Gi", "Gx", "Gy")
FIDUCIALS: tuple[Sequence, ...] = ((), ("Gx",), ("Gy",), ("Gx", "Gx"))

# Ten germs; the accompanying parameter table announces eleven but lists these.
GERMS: tuple[Sequence, ...] = (
    ("Gx",),
    ("Gy",),
    ("Gi", "Gx", "Gy"),
    ("Gx", "Gy", "Gi"),
    ("Gx", "Gi", "Gy"),
    ("Gx", "Gi", "Gi"),
    ("Gy", "Gi", "Gi"),
    ("Gx", "Gx", "Gi", "Gy"),
    ("Gx", "Gy", "Gy", "Gi"),
    ("Gx", "Gx", "Gy", "Gx", "Gy", "Gy"),
)

TESTING_POWERS = tuple(2**k for k in range(14))  # 1, 2, 4, ..., 8192


def germ_power(germ: Sequence, m: int) -> int:
    """Repetition count ``floor(2**m / |germ|)``."""
    return (2**m) // len(germ)


def testing_sequences(labels=BUTTONS, powers=TESTING_POWERS) -> list[Sequence]:
    order = ("Gx", "Gy", "Gi")
    return [power((g,), n) for g in order if g in labels for n in powers]


def germ_design(germs=GERMS, fiducials=FIDUCIALS, m_values=range(1, 14), shots: int = 1000,
                test_shots: int | None = None, testing=None) -> ExperimentDesign:
    """Sequences ``f_i + germ**L + f_j`` for every fiducial pair, germ and ``m``.

    Duplicates are dropped (first occurrence kept) and the testing sequences
    are removed from the training list.
    """
    germs = [tuple(g) for g in germs]
    if not germs:
        raise ValueError("need at least one germ")
    testing = testing_sequences() if testing is None else [tuple(t) for t in testing]
    excluded = set(testing)
    seen: set = set()
    training = []
    for germ in germs:
        for m in m_values:
            body = power(germ, germ_power(germ, m))
            for fi in fiducials:
                for fj in fiducials:
                    s = tuple(fi) + body + tuple(fj)
                    if s not in seen and s not in excluded:
                        seen.add(s)
                        training.append((s, shots))
    k = shots if test_shots is None else test_shots
    return ExperimentDesign(
        training=tuple(training),
        testing=tuple((t, k) for t in testing),
        fiducials=tuple(tuple(f) for f in fiducials),
        buttons=BUTTONS,
    )


def lsgst_prior(gate_eps: float = 1e-4, spam_eps: float = 1e-4) -> PriorSpec:
    return PriorSpec(
        rho=ChannelPrior.exact("zero").ginibre_mixed(spam_eps),
        effect=ChannelPrior.exact("zero").ginibre_mixed(spam_eps),
        gates={
            "Gi": ChannelPrior.exact("identity").bcsz_mixed(gate_eps),
            "Gx": ChannelPrior.rotation("x", np.pi / 2).bcsz_mixed(gate_eps),
            "Gy": ChannelPrior.rotation("y", np.pi / 2).bcsz_mixed(gate_eps),
        },
        fiducials=FIDUCIALS,
    )


def ideal_gateset() -> GateSet:
    return GateSet(ch.ZERO_STATE, ch.ZERO_STATE,
                   {"Gi": np.eye(4), "Gx": ch.rx(np.pi / 2), "Gy": ch.ry(np.pi / 2)})


def tvd(p_reconstruction, p_data):
    """Per-sequence ``|p(s, R) - p(s, E)|`` for a two-outcome measurement."""
    out = np.abs(np.asarray(p_reconstruction, dtype=float) - np.asarray(p_data, dtype=float))
    return float(out) if out.ndim == 0 else out


def tvd_total(design: ExperimentDesign, cloud, dataset) -> float:
    """Sum of TVDs over the testing sequences, using Bayes-mean predictions.

    ``dataset`` is a list of :class:`~oqt.smc.Datum` (empirical frequencies
    are used) or a mapping from sequence to probability.
    """
    seqs = design.testing_sequences
    if isinstance(dataset, dict):
        p_data = np.array([dataset[s] for s in seqs])
    else:
        freq = {d.sequence: d.successes / d.trials for d in dataset}
        p_data = np.array([freq[s] for s in seqs])
    bme, _ = predict_many(cloud, seqs)
    return float(np.sum(tvd(bme, p_data)))


def mean_estimate(cloud: ParticleCloud) -> ParticleCloud:
    """Single-particle cloud at the weighted mean of ``cloud``'s parameters."""
    return ParticleCloud(cloud.pmap, posterior_mean(cloud)[None], dim=cloud.dim)
