"""Rebit state tomography with pseudo-Bloch coordinates."""

from __future__ import annotations

import numpy as np

from ..gateset import Sequence
from ..oprep import OperationalRep
from ..priors import ChannelPrior, PriorSpec
from .design import ExperimentDesign

FIDUCIALS: tuple[Sequence, ...] = ((), ("Rx",), ("Ry",), ("Rx", "Rx"))
BUTTONS = ("Rx", "Ry")


def statetomo_prior(rotation_variance: float = 1e-3, depol=(0.0, 0.1)) -> PriorSpec:
    return PriorSpec(
        rho=ChannelPrior("ginibre", {"real_only": True}).depolarized(*depol),
        effect=ChannelPrior.exact("zero").depolarized(*depol),
        gates={
            "Rx": ChannelPrior.rotation("x", np.pi / 2, rotation_variance).depolarized(*depol),
            "Ry": ChannelPrior.rotation("y", np.pi / 2, rotation_variance).depolarized(*depol),
        },
        fiducials=FIDUCIALS,
    )


def random_fiducial_products(counts, rng: np.random.Generator, fiducials=FIDUCIALS) -> list[Sequence]:
    """One sequence per entry of ``counts``: a product of that many random fiducials."""
    out = []
    for n in counts:
        picks = rng.integers(0, len(fiducials), size=int(n))
        out.append(tuple(label for k in picks for label in fiducials[k]))
    return out


def statetomo_design(rng: np.random.Generator, n_train: int = 50, train_range=(1, 10),
                     n_test: int = 50, test_range=(5, 15), shots: int = 100) -> ExperimentDesign:
    """Random fiducial products whose factor count grows linearly over each range."""
    train = np.round(np.linspace(*train_range, n_train)).astype(int)
    test = np.round(np.linspace(*test_range, n_test)).astype(int)
    return ExperimentDesign(
        training=tuple((s, shots) for s in random_fiducial_products(train, rng)),
        testing=tuple((s, shots) for s in random_fiducial_products(test, rng)),
        fiducials=FIDUCIALS,
        buttons=BUTTONS,
    )


def bloch_from_probabilities(p_empty, p_rx, p_ry) -> np.ndarray:
    """Bloch coordinates read off as if the gates were ideal.

    With ``R(t) = exp(-i t sigma / 2)``, an ideal ``Ry(pi/2)`` followed by a
    ``Z`` measurement has ``Pr(0) = (1 - a_x) / 2`` and an ideal ``Rx(pi/2)``
    gives ``Pr(0) = (1 + a_y) / 2``.
    """
    return np.array([1.0 - 2.0 * p_ry, 2.0 * p_rx - 1.0, 2.0 * p_empty - 1.0])


def pseudo_bloch(rep: OperationalRep) -> np.ndarray:
    """``(a_x, a_y, a_z)`` from the first row of ``F~``.

    Raises
    ------
    ValueError
        If the representation lacks the fiducials ``()``, ``(Rx,)``, ``(Ry,)``.
    """
    fids = list(rep.fiducials)
    try:
        i0, ix, iy = fids.index(()), fids.index(("Rx",)), fids.index(("Ry",))
    except ValueError:
        raise ValueError("pseudo-Bloch coordinates need the fiducials (), (Rx), (Ry)") from None
    row = rep.f_tilde[list(rep.pmap.meas_fiducials).index(())]
    return bloch_from_probabilities(row[i0], row[ix], row[iy])


def bloch_vector(rho_superket) -> np.ndarray:
    """Bloch vector of a qubit state super-ket (normalized Pauli basis)."""
    v = np.asarray(rho_superket, dtype=float)
    return v[1:4] / v[0]
