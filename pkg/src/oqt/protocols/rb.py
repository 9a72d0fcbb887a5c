"""Randomized benchmarking over the single-qubit Clifford group generated by H and S."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import channels as ch
from ..gateset import GateSet, Sequence
from ..priors import ChannelPrior, PriorSpec
from .design import ExperimentDesign

GENERATORS = ("H", "S")
FIDUCIALS: tuple[Sequence, ...] = ((), ("H",), ("H", "S", "H"), ("S", "H", "S"))
CLIFFORD_TOL = 1e-9
GROUP_ORDER = 24

FIT_MAX_ITER = 500
FIT_RTOL = 1e-10
VARIANCE_FLOOR = 1e-12
CONSTANT_ATOL = 1e-12
BOUNDS = np.array([[0.0, 1.0], [0.0, 1.0], [-0.5, 1.0]])  # A, B, p


@dataclass(frozen=True)
class CliffordTable:
    elements: np.ndarray  # (24, 4, 4) ideal PTMs
    products: np.ndarray  # products[i, j] = index of elements[i] @ elements[j]
    inverses: np.ndarray
    words: tuple  # shortest generator word per element, in time order
    identity: int = 0

    def __len__(self) -> int:
        return len(self.elements)

    def compose(self, indices) -> int:
        """Index of the element obtained by applying ``indices`` in time order."""
        out = self.identity
        for c in indices:
            out = int(self.products[c, out])
        return out

    def expand(self, indices) -> Sequence:
        return tuple(label for c in indices for label in self.words[c])


def _generator_ptms() -> dict[str, np.ndarray]:
    return {"H": ch.unitary_superop(ch.HADAMARD), "S": ch.unitary_superop(ch.PHASE)}


@lru_cache(maxsize=1)
def build_clifford_table() -> CliffordTable:
    """Close ``{H, S}`` under multiplication by breadth-first search.

    Words are grown by appending generators in the order ``H, S``, so the
    first word to reach an element is the shortest, ties going to the
    lexicographically smallest.

    Raises
    ------
    RuntimeError
        If the closure does not have exactly 24 elements.
    """
    gens = _generator_ptms()
    elements = [np.eye(4)]
    words: list[Sequence] = [()]
    queue = deque([0])

    def find(m):
        for i, e in enumerate(elements):
            if np.max(np.abs(e - m)) < CLIFFORD_TOL:
                return i
        return None

    while queue:
        i = queue.popleft()
        for g in GENERATORS:
            m = gens[g] @ elements[i]
            if find(m) is None:
                elements.append(m)
                words.append(words[i] + (g,))
                queue.append(len(elements) - 1)
                if len(elements) > GROUP_ORDER:
                    raise RuntimeError("Clifford closure exceeded 24 elements")
    if len(elements) != GROUP_ORDER:
        raise RuntimeError(f"Clifford closure has {len(elements)} elements, expected {GROUP_ORDER}")
    n = len(elements)
    products = np.empty((n, n), dtype=np.intp)
    for i in range(n):
        for j in range(n):
            k = find(elements[i] @ elements[j])
            if k is None:
                raise RuntimeError("Clifford table is not closed")
            products[i, j] = k
    inverses = np.array([int(np.flatnonzero(products[i] == 0)[0]) for i in range(n)])
    elems = np.array(elements)
    elems.setflags(write=False)
    products.setflags(write=False)
    inverses.setflags(write=False)
    return CliffordTable(elems, products, inverses, tuple(words))


def rb_indices(m: int, table: CliffordTable, rng: np.random.Generator) -> tuple[int, ...]:
    """``m`` uniform Clifford indices followed by the inverse of their composition."""
    if m < 1:
        raise ValueError("sequence length must be >= 1")
    body = tuple(int(c) for c in rng.integers(0, len(table), size=m))
    return body + (int(table.inverses[table.compose(body)]),)


def rb_sequence(m: int, table: CliffordTable, rng: np.random.Generator) -> Sequence:
    """Random RB sequence expanded into ``H``/``S`` buttons."""
    return table.expand(rb_indices(m, table, rng))


# -- survival ------------------------------------------------------------------

@dataclass(frozen=True)
class Survival:
    lengths: np.ndarray
    per_hypothesis: np.ndarray  # (N, len(lengths)) mean over sequences
    mean: np.ndarray  # weighted over hypotheses
    variance: np.ndarray


def rb_survival(source, table: CliffordTable, sequences_by_m) -> Survival:
    """Mean survival probability per length.

    ``sequences_by_m`` maps ``m`` to a list of Clifford index sequences (as
    produced by :func:`rb_indices`); every hypothesis is evaluated on the same
    sequences.  ``source`` is a :class:`GateSet` or a particle cloud.
    """
    lengths = np.array(sorted(sequences_by_m))
    names = tuple(f"C{i}" for i in range(len(table)))
    if isinstance(source, GateSet):
        cliffords = np.array([source.superop(w) for w in table.words])
        per = np.empty((1, len(lengths)))
        for j, m in enumerate(lengths):
            vals = []
            for idx in sequences_by_m[m]:
                v = source.rho
                for c in idx:
                    v = cliffords[c] @ v
                vals.append(source.effect @ v)
            per[0, j] = np.mean(np.clip(vals, 0.0, 1.0))
        weights = np.ones(1)
    else:
        model = source.model.with_macros(dict(zip(names, table.words)))
        per = np.empty((len(source), len(lengths)))
        for j, m in enumerate(lengths):
            seqs = [tuple(names[c] for c in idx) for idx in sequences_by_m[m]]
            per[:, j] = model.probabilities(seqs).mean(axis=1)
        weights = source.weights
    mean = weights @ per
    var = weights @ (per - mean) ** 2
    return Survival(lengths, per, mean, var)


# -- decay fitting -------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    A: float
    B: float
    p: float
    covariance: np.ndarray
    converged: bool = True
    degenerate: bool = False
    iterations: int = 0

    @property
    def fidelity(self) -> float:
        return average_fidelity(self.p)


def average_fidelity(p, dim: int = 2):
    """``F_ave = ((d - 1) p + 1) / d``."""
    return ((dim - 1) * np.asarray(p) + 1) / dim


def decay_model(m, a, b, p):
    return (a - b) * np.power(p, m) + b


def _jacobian(m, a, b, p):
    pm = np.power(p, m)
    dp = np.where(m > 0, m * np.power(p, np.maximum(m - 1, 0)), 0.0)
    return np.column_stack([pm, 1.0 - pm, (a - b) * dp])


def fit_decay(points, dim: int = 2, max_iter: int = FIT_MAX_ITER, rtol: float = FIT_RTOL) -> DecayFit:
    """Variance-weighted least squares of ``(A - B) p**m + B`` within the box
    ``A, B in [0, 1]``, ``p in [-0.5, 1]``.

    A grid over ``p`` (with ``A`` and ``B`` solved linearly) seeds a projected
    Levenberg-Marquardt refinement.

    Parameters
    ----------
    points : array_like, shape (n, 3)
        Rows ``(m, mean survival, variance)``; variances are floored at 1e-12.

    Returns
    -------
    DecayFit
        When the means agree to within ``CONSTANT_ATOL`` (round-off from
        long products) the decay rate is unidentifiable; the fit returns ``p = 1``, ``A`` equal to the common value, ``B = 1/d``
        and ``degenerate=True``.

    Raises
    ------
    ValueError
        Fewer than four points.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4 or pts.shape[1] != 3:
        raise ValueError("need at least four (m, mean, variance) rows")
    m, y, var = pts[:, 0], pts[:, 1], np.maximum(pts[:, 2], VARIANCE_FLOOR)
    w = 1.0 / np.sqrt(var)
    if np.ptp(y) <= CONSTANT_ATOL:
        a = float(np.clip(y[0], 0.0, 1.0))
        return DecayFit(a, 1.0 / dim, 1.0, np.zeros((3, 3)), True, True, 0)

    def residual(theta):
        return w * (decay_model(m, *theta) - y)

    def cost(theta):
        r = residual(theta)
        return float(r @ r)

    def project(theta):
        return np.clip(theta, BOUNDS[:, 0], BOUNDS[:, 1])

    # seed: for each grid p, A and B solve a weighted 2x2 linear problem
    grid = np.linspace(-0.5, 1.0, 301)
    pm = np.power.outer(grid, m)  # (G, n)
    u, v, z = pm * w, (1.0 - pm) * w, w * y
    suu, suv, svv = np.sum(u * u, 1), np.sum(u * v, 1), np.sum(v * v, 1)
    suz, svz = u @ z, v @ z
    det = suu * svv - suv**2
    ok = det > 1e-12 * np.maximum(suu * svv, 1e-300)
    safe = np.where(ok, det, 1.0)
    a_hat = np.where(ok, (svv * suz - suv * svz) / safe, suz / np.maximum(suu, 1e-300))
    b_hat = np.where(ok, (suu * svz - suv * suz) / safe, a_hat)
    thetas = np.clip(np.column_stack([a_hat, b_hat, grid]), BOUNDS[:, 0], BOUNDS[:, 1])
    res = w * (decay_model(m[None, :], thetas[:, :1], thetas[:, 1:2], thetas[:, 2:]) - y)
    costs = np.sum(res * res, axis=1)
    k = int(np.argmin(costs))
    theta, c = thetas[k], float(costs[k])
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = residual(theta)
        jac = w[:, None] * _jacobian(m, *theta)
        jtj = jac.T @ jac
        grad = jac.T @ r
        step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-15), -grad)
        trial = project(theta + step)
        c_trial = cost(trial)
        if c_trial <= c:
            moved = np.max(np.abs(trial - theta) / np.maximum(np.abs(theta), 1e-12))
            small_gain = c - c_trial <= rtol * max(c, 1e-300)
            theta, c = trial, c_trial
            lam = max(lam / 3.0, 1e-12)
            if moved <= rtol or small_gain:
                converged = True
                break
        else:
            lam *= 4.0
            if lam > 1e12:
                converged = True  # no descent direction left inside the box
                break
    jac = w[:, None] * _jacobian(m, *theta)
    cov = np.linalg.pinv(jac.T @ jac)
    return DecayFit(float(theta[0]), float(theta[1]), float(theta[2]), cov, converged, False, it)


# -- credible intervals --------------------------------------------------------

def weighted_quantile(values, weights, q):
    """Quantile of a weighted sample (midpoint interpolation of the CDF)."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order] / weights.sum()
    cdf = np.cumsum(w) - 0.5 * w
    return np.interp(q, cdf, v)


def rb_credible_interval(fits, weights=None, level: float = 0.95) -> dict[str, tuple[float, float]]:
    """Joint credible region for ``(A, B, p)`` from per-hypothesis fits.

    Each parameter gets an equal-tailed weighted-quantile interval at level
    ``1 - (1 - level) / 3`` so that, by the Bonferroni inequality, the box
    has joint probability at least ``level``.  The fidelity interval is the
    image of the ``p`` interval.
    """
    fits = list(fits)
    if len(fits) < 2:
        raise ValueError("need at least two fits")
    weights = np.full(len(fits), 1.0 / len(fits)) if weights is None else np.asarray(weights, dtype=float)
    alpha = (1.0 - level) / 3.0
    out = {}
    for name in ("A", "B", "p"):
        vals = np.array([getattr(f, name) for f in fits])
        lo, hi = weighted_quantile(vals, weights, [alpha / 2, 1 - alpha / 2])
        out[name] = (float(lo), float(hi))
    out["fidelity"] = tuple(float(average_fidelity(v)) for v in out["p"])
    return out


# -- prior and designs ---------------------------------------------------------

def rb_prior(eps: float = 1e-3, variance: float = 0.0015) -> PriorSpec:
    return PriorSpec(
        rho=ChannelPrior.exact("zero"),
        effect=ChannelPrior.exact("zero"),
        gates={
            "H": ChannelPrior.rotation("h", np.pi / 2, variance).bcsz_mixed(eps),
            "S": ChannelPrior.rotation("z", np.pi / 2, variance).bcsz_mixed(eps),
        },
        fiducials=FIDUCIALS,
    )


def ideal_gateset() -> GateSet:
    """Perfect ``H`` and ``S`` with ``|0>`` preparation and measurement."""
    return GateSet(ch.ZERO_STATE, ch.ZERO_STATE, _generator_ptms())


def training_lengths(n: int = 100, low: int = 40, high: int = 60) -> list[int]:
    return [int(v) for v in np.round(np.linspace(low, high, n))]


def test_lengths(count: int = 87, low: int = 10, high: int = 252) -> list[int]:
    """``count`` distinct integers, logarithmically spaced over ``[low, high]``."""
    if count > high - low + 1:
        raise ValueError("range too small for that many distinct lengths")
    k = count
    while True:
        vals = np.unique(np.round(np.geomspace(low, high, k)).astype(int))
        if len(vals) >= count:
            break
        k += 1
    if len(vals) > count:
        # drop interior duplicates introduced by overshoot, keeping endpoints
        keep = np.round(np.linspace(0, len(vals) - 1, count)).astype(int)
        vals = vals[keep]
    return [int(v) for v in vals]


def rb_design(table: CliffordTable, rng: np.random.Generator, lengths=None, shots: int = 1) -> ExperimentDesign:
    lengths = training_lengths() if lengths is None else list(lengths)
    return ExperimentDesign(
        training=tuple((rb_sequence(m, table, rng), shots) for m in lengths),
        fiducials=FIDUCIALS,
        buttons=GENERATORS,
    )


def rb_test_sequences(table: CliffordTable, rng: np.random.Generator, lengths=None,
                      per_length: int = 100) -> dict[int, list[tuple[int, ...]]]:
    lengths = test_lengths() if lengths is None else list(lengths)
    return {m: [rb_indices(m, table, rng) for _ in range(per_length)] for m in lengths}


def fit_survival(survival: Survival) -> DecayFit:
    """Fit the cloud-level curve, weighted by the posterior predictive variance."""
    return fit_decay(np.column_stack([survival.lengths, survival.mean, survival.variance]))


def fit_per_hypothesis(survival: Survival) -> list[DecayFit]:
    """Fit every hypothesis' curve with the cloud-level variances as weights."""
    return [fit_decay(np.column_stack([survival.lengths, row, survival.variance]))
            for row in survival.per_hypothesis]
