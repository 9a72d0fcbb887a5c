"""Ramsey interferometry: design, prior, reference truth and frequency fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .. import channels as ch
from ..gateset import GateSet, Sequence
from ..priors import ChannelPrior, PriorSpec
from .design import ExperimentDesign

FIDUCIALS: tuple[Sequence, ...] = ((), ("Rx",), ("Rx", "Rx"), ("Rx", "dt", "Rx"))
BUTTONS = ("Rx", "dt")

# reference gate set used to generate synthetic data
TRUE_RHO_DEPOL = 0.038311
TRUE_EFFECT_DEPOL = 0.023933
TRUE_RX_ERROR = -0.003824
TRUE_OMEGA = 0.346754
DT = 1.0


def ramsey_sequence(n: int) -> Sequence:
    return ("Rx",) + ("dt",) * n + ("Rx",)


def ramsey_design(n_train=range(2, 50), n_test=range(50, 101), shots: int = 500) -> ExperimentDesign:
    n_train, n_test = list(n_train), list(n_test)
    if not n_train:
        raise ValueError("training range is empty")
    return ExperimentDesign(
        training=tuple((ramsey_sequence(n), shots) for n in n_train),
        testing=tuple((ramsey_sequence(n), shots) for n in n_test),
        fiducials=FIDUCIALS,
        buttons=BUTTONS,
    )


def ramsey_prior(rx_variance: float = 1e-3, omega_range=(0.0, 1.0), spam_depol=(0.0, 0.1),
                 dt: float = DT) -> PriorSpec:
    lo, hi = omega_range
    return PriorSpec(
        rho=ChannelPrior.exact("zero").depolarized(*spam_depol),
        effect=ChannelPrior.exact("zero").depolarized(*spam_depol),
        gates={
            "Rx": ChannelPrior.rotation("x", np.pi / 2, rx_variance),
            "dt": ChannelPrior.uniform_rotation("z", lo * dt, hi * dt),
        },
        fiducials=FIDUCIALS,
    )


def ramsey_gateset(omega: float = TRUE_OMEGA, rx_error: float = TRUE_RX_ERROR,
                   rho_depol: float = TRUE_RHO_DEPOL, effect_depol: float = TRUE_EFFECT_DEPOL,
                   dt: float = DT) -> GateSet:
    return GateSet(
        rho=ch.depolarize(ch.ZERO_STATE, rho_depol),
        effect=ch.depolarize(ch.ZERO_STATE, effect_depol),
        gates={"Rx": ch.rx(np.pi / 2 + rx_error), "dt": ch.rz(omega * dt)},
    )


@dataclass(frozen=True)
class RamseyFit:
    omega: float
    amplitude: float
    offset: float
    residual: float  # Euclidean norm of the fit residuals
    degenerate: bool  # data carry no frequency information


def _shape(model: str):
    if model == "cos2":
        return lambda phase: np.cos(phase) ** 2
    if model == "sin2":
        return lambda phase: np.sin(phase) ** 2
    raise ValueError(f"model must be 'cos2' or 'sin2', got {model!r}")


def fit_ramsey_frequency(points, dt: float = DT, model: str = "sin2", free_contrast: bool = True,
                         grid: int = 4000, max_nfev: int = 2000) -> RamseyFit:
    """Least-squares fit of ``offset + amplitude * f(omega n dt / 2)``.

    ``f`` is ``cos^2`` or ``sin^2``.  With ``free_contrast=False`` the
    amplitude is 1 and the offset 0.  The frequency is searched over
    ``(0, pi / dt]`` (aliases beyond are indistinguishable for integer
    ``n``) on a grid with the linear parameters profiled out, then refined.

    Raises
    ------
    RuntimeError
        If the refinement does not converge within ``max_nfev`` evaluations.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (n, probability) points")
    n, y = pts[:, 0], pts[:, 1]
    f = _shape(model)

    def linear(omega):
        basis = f(omega * n * dt / 2)
        if not free_contrast:
            return 1.0, 0.0
        design = np.column_stack([basis, np.ones_like(basis)])
        (amp, off), *_ = np.linalg.lstsq(design, y, rcond=None)
        return amp, off

    def resid(params):
        omega, amp, off = params
        return off + amp * f(omega * n * dt / 2) - y

    omegas = np.linspace(np.pi / dt / grid, np.pi / dt, grid)
    costs = [np.sum(resid((w, *linear(w))) ** 2) for w in omegas]
    w0 = omegas[int(np.argmin(costs))]
    amp0, off0 = linear(w0)
    if free_contrast:
        sol = least_squares(resid, x0=[w0, amp0, off0], xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=max_nfev)
        params = sol.x
    else:
        sol = least_squares(lambda p: resid((p[0], 1.0, 0.0)), x0=[w0], xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=max_nfev)
        params = (sol.x[0], 1.0, 0.0)
    if sol.status <= 0:
        raise RuntimeError(f"frequency fit did not converge: {sol.message}")
    omega, amp, off = (float(v) for v in params)
    degenerate = bool(np.ptp(y) < 1e-9 or abs(amp) < 1e-9)
    return RamseyFit(omega, amp, off, float(np.linalg.norm(resid((omega, amp, off)))), degenerate)
