"""Continuous-time dynamics of the operational representation.

The state evolves as ``d|rho>>/dt = L |rho>>`` with ``L = sum_l alpha_l F_l``
expanded over the fiducial super-operators.  Tensor entries then obey

    dE~_i/dt = sum_l alpha_l <<E| F_i F_l |rho(t)>> = sum_l alpha_l F~_il

and similar equations whose right-hand sides involve longer fiducial
products.  When the fiducial monomials and binomials are closed under
multiplication the system is finite (:func:`evolve_closed`); otherwise the
hierarchy is truncated after ``K`` Taylor terms (:func:`evolve_truncated`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

from . import channels as ch
from .gateset import GateSet

CLOSURE_TOL = 1e-9
LAMBERT_MAX_ITER = 50
LAMBERT_TOL = 1e-14
ODE_RTOL = 1e-8


# -- Lindblad coefficients -----------------------------------------------------

@dataclass(frozen=True)
class LindbladCoefficients:
    alpha: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "alpha", a)

    def generator(self, fiducial_superops) -> np.ndarray:
        """``L = sum_l alpha_l F_l``."""
        return np.einsum("l,lij->ij", self.alpha, np.asarray(fiducial_superops))


def learn_alpha(e_dot, f_tilde) -> LindbladCoefficients:
    """Solve ``F~ alpha = dE~/dt`` (minimum-norm least squares if ``F~`` is singular)."""
    e_dot = np.asarray(e_dot, dtype=float)
    f_tilde = np.asarray(f_tilde, dtype=float)
    if f_tilde.shape[0] != e_dot.shape[0]:
        raise ValueError("F~ rows must match the length of dE~/dt")
    alpha = np.linalg.pinv(f_tilde) @ e_dot
    return LindbladCoefficients(alpha, float(np.linalg.norm(f_tilde @ alpha - e_dot)))


def fiducial_superops(gs: GateSet, fiducials) -> np.ndarray:
    return np.array([gs.superop(tuple(f)) for f in fiducials])


def e_tilde_at(gs: GateSet, fiducials, lindblad, t: float) -> np.ndarray:
    """``E~_i(t) = <<E| F_i exp(L t) |rho>>``."""
    rho_t = expm(np.asarray(lindblad) * t) @ gs.rho
    return np.array([gs.effect @ f @ rho_t for f in fiducial_superops(gs, fiducials)])


def finite_difference_edot(gs: GateSet, lindblad, fiducials, delta: float, t: float = 0.0) -> np.ndarray:
    """Forward difference ``(E~(t + delta) - E~(t)) / delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return (e_tilde_at(gs, fiducials, lindblad, t + delta) - e_tilde_at(gs, fiducials, lindblad, t)) / delta


# -- closed fiducial algebras --------------------------------------------------

@dataclass(frozen=True)
class FiducialAlgebra:
    """Monomials and binomials of the fiducials with their product table.

    ``elements[fiducial_index[i]]`` is ``F_i`` and ``products[a, b]`` is the
    index of ``elements[a] @ elements[b]`` (``-1`` when the product is not an
    element).
    """

    elements: np.ndarray
    fiducial_index: np.ndarray
    products: np.ndarray
    closed: bool

    def __len__(self) -> int:
        return len(self.elements)

    def pair_index(self, i: int, j: int) -> int:
        """Element index of ``F_i F_j``."""
        return int(self.products[self.fiducial_index[i], self.fiducial_index[j]])


def close_fiducial_algebra(superops, tol: float = CLOSURE_TOL) -> FiducialAlgebra:
    """Build ``S = {F_i} u {F_i F_j}`` and try to index every pairwise product."""
    fids = [np.asarray(f, dtype=float) for f in superops]
    if not fids:
        raise ValueError("need at least one fiducial")
    elements: list[np.ndarray] = []

    def find(m):
        for k, e in enumerate(elements):
            if np.max(np.abs(e - m)) < tol:
                return k
        return -1

    def add(m):
        k = find(m)
        if k < 0:
            elements.append(m)
            k = len(elements) - 1
        return k

    index = np.array([add(f) for f in fids], dtype=np.intp)
    for i in range(len(fids)):
        for j in range(len(fids)):
            add(fids[i] @ fids[j])
    n = len(elements)
    products = np.array([[find(elements[a] @ elements[b]) for b in range(n)] for a in range(n)],
                        dtype=np.intp).reshape(n, n)
    return FiducialAlgebra(np.array(elements), index, products, bool(np.all(products >= 0)))


# -- operational state vectors -------------------------------------------------

@dataclass(frozen=True)
class OpStateVector:
    """``Psi = [E~_i, F~_ij, G~(k)_ij, G~(k)_ijl]`` flattened row-major."""

    psi: np.ndarray
    n_fiducials: int
    gate_labels: tuple

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        object.__setattr__(self, "gate_labels", tuple(self.gate_labels))
        if psi.shape != (layout_size(self.n_fiducials, len(self.gate_labels)),):
            raise ValueError("state vector length does not match its layout")
        object.__setattr__(self, "psi", psi)

    def _blocks(self):
        n, k = self.n_fiducials, len(self.gate_labels)
        sizes = [n, n * n, k * n * n, k * n**3]
        return np.split(self.psi, np.cumsum(sizes)[:-1])

    @property
    def e(self) -> np.ndarray:
        return self._blocks()[0]

    @property
    def f(self) -> np.ndarray:
        n = self.n_fiducials
        return self._blocks()[1].reshape(n, n)

    @property
    def g2(self) -> np.ndarray:
        n = self.n_fiducials
        return self._blocks()[2].reshape(len(self.gate_labels), n, n)

    @property
    def g3(self) -> np.ndarray:
        n = self.n_fiducials
        return self._blocks()[3].reshape(len(self.gate_labels), n, n, n)

    @classmethod
    def from_tensors(cls, e, f, g2, g3, gate_labels) -> "OpStateVector":
        psi = np.concatenate([np.ravel(e), np.ravel(f), np.ravel(g2), np.ravel(g3)])
        return cls(psi, len(np.ravel(e)), gate_labels)

    def names(self) -> list[str]:
        return layout_names(self.n_fiducials, self.gate_labels)


def layout_size(n: int, k: int) -> int:
    return n + n * n + k * n * n + k * n**3


def layout_names(n: int, gate_labels) -> list[str]:
    out = [f"E[{i}]" for i in range(n)]
    out += [f"F[{i};{j}]" for i in range(n) for j in range(n)]
    out += [f"G[{g}][{i};{j}]" for g in gate_labels for i in range(n) for j in range(n)]
    out += [f"G[{g}][{i};{j};{l}]" for g in gate_labels for i in range(n) for j in range(n)
            for l in range(n)]
    return out


def op_state_vector(gs: GateSet, fiducials, rho=None) -> OpStateVector:
    """Tensors of ``gs`` (optionally with a replaced state) at one instant."""
    fs = fiducial_superops(gs, fiducials)
    rho = gs.rho if rho is None else np.asarray(rho, dtype=float)
    e_row = gs.effect
    gates = [gs.gates[k] for k in gs.labels]
    e = np.array([e_row @ f @ rho for f in fs])
    f = np.einsum("a,iab,jbc,c->ij", e_row, fs, fs, rho)
    g2 = np.einsum("a,iab,kbc,jcd,d->kij", e_row, fs, np.array(gates), fs, rho, optimize=True)
    g3 = np.einsum("a,iab,kbc,jcd,lde,e->kijl", e_row, fs, np.array(gates), fs, fs, rho, optimize=True)
    return OpStateVector.from_tensors(e, f, g2, g3, gs.labels)


def closed_generator(algebra: FiducialAlgebra, alpha, n_gates: int) -> np.ndarray:
    """Matrix ``K`` with ``dPsi/dt = K Psi`` for a closed fiducial algebra.

    Every entry of ``Psi`` is ``<<E| X s_a |rho>>`` with ``X`` either the
    identity or ``F_i G_k``; its derivative is ``sum_l alpha_l`` times the
    entry for ``X s_{g(a, l)}``, which the closure guarantees is present.
    """
    if not algebra.closed:
        raise ValueError("fiducial algebra is not closed under multiplication")
    alpha = np.asarray(alpha, dtype=float)
    n = len(algebra.fiducial_index)
    if alpha.shape != (n,):
        raise ValueError(f"expected {n} coefficients")
    fid = algebra.fiducial_index
    pair = algebra.products[np.ix_(fid, fid)]  # element of F_i F_j

    # (prefix, element) -> first position in Psi; prefix -1 means identity
    where: dict[tuple[int, int], int] = {}
    entries: list[tuple[int, int]] = []

    def note(prefix, elem):
        where.setdefault((prefix, int(elem)), len(entries))
        entries.append((prefix, int(elem)))

    for i in range(n):
        note(-1, fid[i])
    for i in range(n):
        for j in range(n):
            note(-1, pair[i, j])
    for k in range(n_gates):
        for i in range(n):
            for j in range(n):
                note(k * n + i, fid[j])
    for k in range(n_gates):
        for i in range(n):
            for j in range(n):
                for l in range(n):
                    note(k * n + i, pair[j, l])

    size = len(entries)
    gen = np.zeros((size, size))
    for row, (prefix, elem) in enumerate(entries):
        for l in range(n):
            target = (prefix, int(algebra.products[elem, fid[l]]))
            if target not in where:
                raise ValueError("state vector does not contain every product needed by the "
                                 "equations of motion")
            gen[row, where[target]] += alpha[l]
    return gen


def _rk4(gen: np.ndarray, y: np.ndarray, h: float, steps: int) -> np.ndarray:
    for _ in range(steps):
        k1 = gen @ y
        k2 = gen @ (y + 0.5 * h * k1)
        k3 = gen @ (y + 0.5 * h * k2)
        k4 = gen @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def integrate_linear(gen, y0, times, rtol: float = ODE_RTOL, min_steps: int = 4,
                     max_halvings: int = 30) -> np.ndarray:
    """Classical RK4 for ``dy/dt = gen y`` on the grid ``times``.

    Each interval is integrated with ``s`` and ``2 s`` steps, doubling ``s``
    until the two results agree to ``rtol`` (relative to the solution size).
    """
    gen = np.asarray(gen, dtype=float)
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times), len(y0)))
    y = np.asarray(y0, dtype=float).copy()
    out[0] = y
    for n in range(1, len(times)):
        span = times[n] - times[n - 1]
        steps = min_steps
        coarse = _rk4(gen, y, span / steps, steps)
        for _ in range(max_halvings):
            fine = _rk4(gen, y, span / (2 * steps), 2 * steps)
            scale = max(np.max(np.abs(fine)), 1e-300)
            if np.max(np.abs(fine - coarse)) <= rtol * scale:
                break
            coarse, steps = fine, 2 * steps
        else:
            raise RuntimeError("step halving did not reach the requested tolerance")
        y = fine
        out[n] = y
    return out


def evolve_closed(psi0: OpStateVector, algebra: FiducialAlgebra, alpha, times,
                  rtol: float = ODE_RTOL) -> list[OpStateVector]:
    """Integrate the finite closed-algebra equations of motion.

    Raises
    ------
    ValueError
        If the algebra is not closed.
    """
    gen = closed_generator(algebra, alpha, len(psi0.gate_labels))
    traj = integrate_linear(gen, psi0.psi, times, rtol)
    return [OpStateVector(row, psi0.n_fiducials, psi0.gate_labels) for row in traj]


# -- truncated hierarchy -------------------------------------------------------

def lambert_w(x: float, max_iter: int = LAMBERT_MAX_ITER, tol: float = LAMBERT_TOL) -> float:
    """Principal branch ``W(x)`` for ``x >= 0`` by Newton iteration on ``w e^w = x``."""
    if x < 0:
        raise ValueError("only x >= 0 is supported")
    if x == 0:
        return 0.0
    w = np.log1p(x) if x < np.e else np.log(x) - np.log(np.log(x))
    for _ in range(max_iter):
        ew = np.exp(w)
        step = (w * ew - x) / (ew * (w + 1.0))
        w -= step
        if abs(step) <= tol * max(1.0, abs(w)):
            break
    return float(w)


def truncation_bound(rate: float, k: int) -> float:
    """``(rate / (K + 1)) ** (K + 1)`` with ``rate = sum_l |alpha_l| Delta``."""
    return (rate / (k + 1)) ** (k + 1)


def taylor_truncation_order(alpha, delta: float, eps: float, rigorous: bool = False) -> int:
    """``K = floor(ln(1/eps) / W(ln(1/eps) / x))`` with ``x = sum_l |alpha_l| delta``.

    The result satisfies ``(x / (K + 1)) ** (K + 1) <= eps``.  That quantity
    is not an upper bound on the Taylor remainder ``x**(K+1) / (K+1)!``
    (Stirling only gives ``(e x / (K + 1)) ** (K + 1)``), so ``rigorous=True``
    replaces ``x`` by ``e x``, which makes the remainder of a physical
    (CPTP-generating) evolution at most ``eps``.

    Raises
    ------
    ValueError
        If ``eps`` is outside ``(0, 1)`` or ``delta`` exceeds ``sum_l |alpha_l|``
        (take a smaller step).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    total = float(np.sum(np.abs(alpha)))
    rate = total * delta
    if rate == 0.0:
        return 0
    if delta > total:
        raise ValueError(f"step {delta} exceeds sum |alpha| = {total}; reduce the step size")
    if rigorous:
        rate *= np.e
    log_inv = np.log(1.0 / eps)
    k = int(np.floor(log_inv / lambert_w(log_inv / rate)))
    while truncation_bound(rate, k) > eps:  # guards rounding at exact integers
        k += 1
    return k


def taylor_remainder_bound(alpha, delta: float, k: int) -> float:
    """Lagrange bound ``(sum |alpha| delta)**(K+1) / (K+1)!`` for physical evolutions."""
    rate = float(np.sum(np.abs(alpha))) * delta
    return rate ** (k + 1) / factorial(k + 1)


class ExtendedTensors:
    """Hierarchy ``E~_{i1...ip} = <<E| F_i1 ... F_ip |rho>>`` up to rank ``depth``.

    Contractions with ``alpha`` over trailing indices give time derivatives:
    ``d^j/dt^j E~_{i1..ip} = sum alpha_l1 ... alpha_lj E~_{i1..ip l1..lj}``.
    Built from explicit arrays or, lazily, from a generating gate set.
    """

    def __init__(self, tensors=None, *, gateset: GateSet | None = None, fiducials=None,
                 depth: int | None = None, rho=None):
        if tensors is not None:
            self._tensors = [np.asarray(t, dtype=float) for t in tensors]
            for p, t in enumerate(self._tensors):
                if t.ndim != p + 1:
                    raise ValueError(f"tensor {p} should have rank {p + 1}")
            self.depth = len(self._tensors)
            self._fids = None
            self.n = self._tensors[0].shape[0]
        else:
            if gateset is None or fiducials is None or depth is None:
                raise ValueError("give either tensors or gateset, fiducials and depth")
            self._tensors = None
            self._fids = fiducial_superops(gateset, fiducials)
            self._effect = gateset.effect
            self._rho = gateset.rho if rho is None else np.asarray(rho, dtype=float)
            self.depth = depth
            self.n = len(self._fids)

    @classmethod
    def from_gateset(cls, gs: GateSet, fiducials, depth: int, rho=None) -> "ExtendedTensors":
        """Materialize every rank up to ``depth`` (size ``n**depth``; keep small)."""
        fs = fiducial_superops(gs, fiducials)
        rho = gs.rho if rho is None else np.asarray(rho, dtype=float)
        return cls([_chain_states(fs, rho, p + 1) @ gs.effect for p in range(depth)])

    def derivative(self, alpha, rank: int, order: int) -> np.ndarray:
        """``d^order/dt^order`` of the rank-``rank`` tensor."""
        if rank + order > self.depth:
            raise ValueError(f"hierarchy depth {self.depth} is insufficient for rank {rank} "
                             f"and {order} derivatives")
        alpha = np.asarray(alpha, dtype=float)
        if self._tensors is not None:
            t = self._tensors[rank + order - 1]
            for _ in range(order):
                t = t @ alpha
            return t
        # contracting trailing fiducial indices with alpha inserts powers of L
        gen = np.einsum("l,lij->ij", alpha, self._fids)
        v = self._rho
        for _ in range(order):
            v = gen @ v
        return _chain_states(self._fids, v, rank) @ self._effect


def _chain_states(fids: np.ndarray, v: np.ndarray, rank: int) -> np.ndarray:
    """Array ``out[i1, ..., ir] = F_i1 ... F_ir v`` (``F_ir`` acts first)."""
    out = v
    for _ in range(rank):
        out = np.einsum("iab,...b->i...a", fids, out)
    return out


def evolve_truncated(hierarchy: ExtendedTensors, alpha, delta: float, k: int) -> list[np.ndarray]:
    """Order-``K`` Taylor step of every tensor rank the hierarchy supports.

    Returns the evolved tensors of ranks ``1 .. depth - K``.

    Raises
    ------
    ValueError
        If ``depth <= K``.
    """
    if hierarchy.depth <= k:
        raise ValueError(f"hierarchy depth {hierarchy.depth} is insufficient for K = {k}")
    out = []
    for rank in range(1, hierarchy.depth - k + 1):
        acc = sum(hierarchy.derivative(alpha, rank, j) * delta**j / factorial(j) for j in range(k + 1))
        out.append(np.asarray(acc))
    return out


# -- generator learning --------------------------------------------------------

def learn_generator(times, psis) -> np.ndarray:
    """Least-squares ``K`` from uniformly spaced snapshots ``Psi(t_n)``.

    Consecutive pairs are matched as
    ``(Psi(t + delta) - Psi(t)) / delta = K (Psi(t) + Psi(t + delta)) / 2``,
    which is second-order accurate in ``delta``.  A rank-deficient snapshot
    matrix gives the minimum-norm solution and a warning.
    """
    times = np.asarray(times, dtype=float)
    psis = np.asarray([p.psi if isinstance(p, OpStateVector) else p for p in psis], dtype=float)
    if len(times) != len(psis) or len(times) < 2:
        raise ValueError("need matching times and at least two snapshots")
    steps = np.diff(times)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * np.max(steps):
        raise ValueError("snapshots must be uniformly spaced in time")
    delta = steps[0]
    lhs = ((psis[1:] - psis[:-1]) / delta).T  # (D, T-1)
    mid = (0.5 * (psis[1:] + psis[:-1])).T
    rank = np.linalg.matrix_rank(mid)
    if rank < mid.shape[0]:
        warnings.warn(f"snapshot matrix has rank {rank} < {mid.shape[0]}; "
                      "returning the minimum-norm generator", RuntimeWarning, stacklevel=2)
    return lhs @ np.linalg.pinv(mid)


def apply_generator(gen, psi0, t: float):
    """``exp(K t) Psi(0)``; keeps the :class:`OpStateVector` type when given one."""
    if isinstance(psi0, OpStateVector):
        return OpStateVector(expm(np.asarray(gen) * t) @ psi0.psi, psi0.n_fiducials, psi0.gate_labels)
    return expm(np.asarray(gen) * t) @ np.asarray(psi0, dtype=float)


def direct_trajectory(gs: GateSet, fiducials, lindblad, times) -> list[OpStateVector]:
    """Reference trajectory: propagate ``|rho>>`` exactly and rebuild the tensors."""
    lindblad = np.asarray(lindblad, dtype=float)
    return [op_state_vector(gs, fiducials, rho=expm(lindblad * t) @ gs.rho) for t in times]



# -- closed test instances -----------------------------------------------------

def closed_instance(rng: np.random.Generator, kind: str = "pauli", order: int = 3,
                    conjugate: bool = False) -> tuple[GateSet, list]:
    """Random gate set whose fiducials form a closed algebra.

    ``pauli`` uses the identity plus a random nonempty subset of the Pauli
    channels as fiducials; ``cyclic`` uses the powers ``R**k`` (``k < order``)
    of a ``2 pi / order`` rotation about ``z``.  With ``conjugate`` every
    fiducial is conjugated by one Haar-random unitary, which preserves
    closure.  The state is Ginibre-random and an extra BCSZ channel ``A``
    rides along as a non-fiducial gate.
    """
    v = ch.unitary_superop(unitary_group.rvs(2, random_state=rng)) if conjugate else np.eye(4)
    v_inv = v.T  # real orthogonal PTM of a unitary
    if kind == "pauli":
        size = int(rng.integers(1, 4))
        chosen = sorted(rng.choice(3, size=size, replace=False))
        gates = {}
        for i in chosen:
            axis = "xyz"[i]
            gates[axis.upper()] = v @ ch.unitary_superop(ch.rotation(axis, np.pi)) @ v_inv
        fiducials = [()] + [(label,) for label in gates]
    elif kind == "cyclic":
        if order < 2:
            raise ValueError("cyclic instances need order >= 2")
        gates = {"R": v @ ch.rz(2 * np.pi / order) @ v_inv}
        fiducials = [("R",) * k for k in range(order)]
    else:
        raise ValueError(f"kind must be 'pauli' or 'cyclic', got {kind!r}")
    gates["A"] = ch.sample_bcsz(2, rng)
    rho = ch.to_superket(ch.sample_ginibre_density(2, rng), check_hermitian=False).real
    return GateSet(rho, ch.ZERO_STATE, gates), fiducials
