"""Operational (gauge-free) representation of a gate set.

For fiducial sequences ``f_i`` the representation consists of the observable
probabilities::

    E~_i      = Pr(f_i)
    F~_ij     = Pr(f_j + f_i)            = <<E| F_i F_j |rho>>
    G~(k)_ij  = Pr(f_j + (k,) + f_i)     = <<E| F_i G_k F_j |rho>>

Entries whose underlying button sequences coincide are stored once, in a
minimal parameter vector; :class:`ParameterMap` holds the index bookkeeping.
When separate preparation and measurement fiducials are used, rows of
``F~``/``G~`` follow the measurement list and columns the preparation list.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .gateset import EMPTY, GateSet, Sequence, concat

RANK_RTOL = 1e-10
POSITIVITY_TOL = 1e-9


# -- minimal parameterization --------------------------------------------------

@dataclass(frozen=True)
class ParameterMap:
    """Association between tensor entries and minimal-parameter slots."""

    gate_labels: tuple[str, ...]
    prep_fiducials: tuple[Sequence, ...]
    meas_fiducials: tuple[Sequence, ...]
    shared: bool
    e_meas: np.ndarray  # (n_meas,)
    e_prep: np.ndarray  # (n_prep,)
    f: np.ndarray  # (n_meas, n_prep)
    g: np.ndarray  # (n_gates, n_meas, n_prep)
    slot_sequences: tuple[Sequence, ...]

    @property
    def n_params(self) -> int:
        return len(self.slot_sequences)

    @property
    def n_raw(self) -> int:
        n_e = self.e_meas.size + (0 if self.shared else self.e_prep.size)
        return n_e + self.f.size + self.g.size

    @property
    def fiducials(self) -> tuple[Sequence, ...]:
        return self.prep_fiducials

    def expand(self, x):
        """Tensors ``(E~_meas, E~_prep, F~, G~)`` from minimal vectors ``x[..., P]``."""
        x = np.asarray(x, dtype=float)
        return x[..., self.e_meas], x[..., self.e_prep], x[..., self.f], x[..., self.g]

    def compress(self, e_meas, e_prep, f, g) -> np.ndarray:
        """Minimal vector from full tensors, reading each slot at its first entry."""
        x = np.full(self.n_params, np.nan)
        for idx, vals in ((self.g, g), (self.f, f), (self.e_prep, e_prep), (self.e_meas, e_meas)):
            x[np.asarray(idx).ravel()] = np.asarray(vals, dtype=float).ravel()
        return x

    def entries(self):
        """Yield ``(tensor, index, slot)`` for every raw entry in scan order."""
        for i, s in enumerate(self.e_meas):
            yield "E", (i,), int(s)
        if not self.shared:
            for j, s in enumerate(self.e_prep):
                yield "E_prep", (j,), int(s)
        for (i, j), s in np.ndenumerate(self.f):
            yield "F", (i, j), int(s)
        for (k, i, j), s in np.ndenumerate(self.g):
            yield "G", (self.gate_labels[k], i, j), int(s)

    def to_dict(self) -> dict:
        return {
            "gate_labels": list(self.gate_labels),
            "prep_fiducials": [list(s) for s in self.prep_fiducials],
            "meas_fiducials": None if self.shared else [list(s) for s in self.meas_fiducials],
            "e_meas": self.e_meas.tolist(),
            "e_prep": self.e_prep.tolist(),
            "f": self.f.tolist(),
            "g": self.g.tolist(),
            "slot_sequences": [list(s) for s in self.slot_sequences],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParameterMap":
        pmap = minimal_parameterization(
            d["gate_labels"], [tuple(s) for s in d["prep_fiducials"]],
            None if d.get("meas_fiducials") is None else [tuple(s) for s in d["meas_fiducials"]],
        )
        if pmap.to_dict()["slot_sequences"] != d["slot_sequences"]:
            raise ValueError("stored index map does not match its fiducials")
        return pmap


def minimal_parameterization(buttons: Iterable[str], fiducials: Iterable[Sequence],
                             meas_fiducials: Iterable[Sequence] | None = None) -> ParameterMap:
    """Deduplicate operational-representation entries by button sequence.

    Two entries share a slot iff their full button sequences are identical.
    Slots are numbered by first occurrence scanning ``E~``, then ``F~``
    row-major, then each ``G~(k)`` in the given gate-label order.
    """
    labels = tuple(buttons)
    prep = tuple(tuple(f) for f in fiducials)
    shared = meas_fiducials is None
    meas = prep if shared else tuple(tuple(f) for f in meas_fiducials)
    if not prep or not meas:
        raise ValueError("need at least one fiducial")
    if len(set(labels)) != len(labels):
        raise ValueError("gate labels must be unique")

    slots: dict[Sequence, int] = {}

    def slot(s: Sequence) -> int:
        return slots.setdefault(s, len(slots))

    e_meas = np.array([slot(f) for f in meas], dtype=np.intp)
    e_prep = e_meas if shared else np.array([slot(f) for f in prep], dtype=np.intp)
    f_idx = np.array([[slot(concat(pj, mi)) for pj in prep] for mi in meas], dtype=np.intp)
    g_idx = np.array(
        [[[slot(concat(pj, (k,), mi)) for pj in prep] for mi in meas] for k in labels],
        dtype=np.intp,
    ).reshape(len(labels), len(meas), len(prep))
    return ParameterMap(
        gate_labels=labels,
        prep_fiducials=prep,
        meas_fiducials=meas,
        shared=shared,
        e_meas=e_meas,
        e_prep=e_prep,
        f=f_idx,
        g=g_idx,
        slot_sequences=tuple(slots),
    )


# -- batched evaluation --------------------------------------------------------

def truncated_pinv(f: np.ndarray, rank: int) -> np.ndarray:
    """Pseudo-inverse keeping the ``rank`` largest singular values (batched)."""
    u, s, vt = np.linalg.svd(f)
    r = min(rank, s.shape[-1])
    s_r = s[..., :r]
    with np.errstate(divide="ignore"):
        inv = np.where(s_r > 0, 1.0 / np.where(s_r > 0, s_r, 1.0), 0.0)
    return np.einsum("...ki,...k,...jk->...ij", vt[..., :r, :], inv, u[..., :, :r])


@dataclass(frozen=True)
class OperationalModel:
    """Per-hypothesis transfer matrices for fast sequence evaluation.

    ``mats[n, a] = F~^+ G~(a)``, ``right[n] = F~^+ E~_meas`` and
    ``left[n] = E~_prep``, so ``Pr(s) = left . M_{s_last} ... M_{s_0} . right``.
    """

    alphabet: tuple[str, ...]
    mats: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def n_hypotheses(self) -> int:
        return self.mats.shape[0]

    def raw_probabilities(self, sequences, backend: str | None = None,
                          compress: bool = True) -> np.ndarray:
        """Unclipped probabilities, shape ``(n_hypotheses, len(sequences))``.

        Long sequences containing a long periodic run (a repeated germ) are
        evaluated with batched matrix powers; everything else goes through
        the chain kernel.
        """
        sequences = [tuple(s) for s in sequences]
        out = np.empty((self.n_hypotheses, len(sequences)))
        plain, factored = [], []
        for i, s in enumerate(sequences):
            pieces = periodic_factorization(s) if compress else None
            (factored if pieces else plain).append((i, pieces or s))
        if plain:
            flat, offsets = kernels.encode_sequences([s for _, s in plain], self.alphabet)
            out[:, [i for i, _ in plain]] = kernels.chain_probabilities(
                self.mats, self.left, self.right, flat, offsets, backend=backend)
        if factored:
            cache: dict = {}
            for i, pieces in factored:
                v = self.right
                for word, reps in pieces:
                    v = np.einsum("nij,nj->ni", self._piece(word, reps, cache), v)
                out[:, i] = np.einsum("ni,ni->n", self.left, v)
        return out

    def _piece(self, word, reps, cache) -> np.ndarray:
        key = (word, reps)
        if key not in cache:
            if reps == 1:
                index = {a: i for i, a in enumerate(self.alphabet)}
                try:
                    m = self.mats[:, index[word[0]]]
                    for label in word[1:]:
                        m = self.mats[:, index[label]] @ m
                except KeyError as exc:
                    raise KeyError(f"unknown button label {exc.args[0]!r}") from None
            else:
                m = np.linalg.matrix_power(self._piece(word, 1, cache), reps)
            cache[key] = m
        return cache[key]

    def probabilities(self, sequences, clip: bool = True, backend: str | None = None) -> np.ndarray:
        p = self.raw_probabilities(sequences, backend=backend)
        if clip:
            p = clip_probabilities(p)
        return p

    def with_macros(self, macros: Mapping[str, Sequence]) -> "OperationalModel":
        """Extend the alphabet with composite buttons (e.g. Clifford words)."""
        index = {a: i for i, a in enumerate(self.alphabet)}
        n, _, f, _ = self.mats.shape
        extra = []
        for name, word in macros.items():
            m = np.broadcast_to(np.eye(f), (n, f, f)).copy()
            for label in word:
                m = self.mats[:, index[label]] @ m
            extra.append(m)
        mats = np.concatenate([self.mats, np.stack(extra, axis=1)], axis=1) if extra else self.mats
        return OperationalModel(self.alphabet + tuple(macros), np.ascontiguousarray(mats),
                                self.left, self.right)


@lru_cache(maxsize=1 << 16)
def periodic_factorization(s: Sequence, max_period: int = 8, min_length: int = 64):
    """Split ``s`` as ``prefix + word**reps + suffix`` around its longest periodic run.

    Returns ``[(word, reps), ...]`` in time order (``reps == 1`` for the plain
    prefix and suffix), or ``None`` when ``s`` is short or has no run worth
    factoring.
    """
    n = len(s)
    if n < min_length:
        return None
    _, codes = np.unique(np.array(s, dtype=object).astype(str), return_inverse=True)
    best = None  # (covered length, start, period)
    for q in range(1, min(max_period, n // 2) + 1):
        eq = np.concatenate([[False], codes[:-q] == codes[q:], [False]]).astype(np.int8)
        edges = np.flatnonzero(np.diff(eq))
        starts, ends = edges[0::2], edges[1::2]
        if starts.size == 0:
            continue
        k = int(np.argmax(ends - starts))
        span = int(ends[k] - starts[k]) + q
        if best is None or span > best[0]:
            best = (span, int(starts[k]), q)
    if best is None or best[0] < min_length // 2:
        return None
    span, start, q = best
    reps = span // q
    stop = start + reps * q
    pieces = []
    if start:
        pieces.append((s[:start], 1))
    pieces.append((s[start:start + q], reps))
    if stop < n:
        pieces.append((s[stop:], 1))
    return tuple(pieces)


def clip_probabilities(p):
    p = np.nan_to_num(np.asarray(p, dtype=float), nan=0.0, posinf=1.0, neginf=0.0)
    return np.clip(p, 0.0, 1.0)


def compile_model(pmap: ParameterMap, x, dim: int) -> OperationalModel:
    """Build the batched transfer matrices for minimal vectors ``x (N, P)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    e_meas, e_prep, f, g = pmap.expand(x)
    f_pinv = truncated_pinv(f, dim * dim)
    mats = np.einsum("npm,nkmq->nkpq", f_pinv, g)
    right = np.einsum("npm,nm->np", f_pinv, e_meas)
    return OperationalModel(pmap.gate_labels, np.ascontiguousarray(mats), e_prep, right)


# -- the representation --------------------------------------------------------

@dataclass(frozen=True)
class OperationalRep:
    """Gauge-free parameters of one gate set for a fixed fiducial choice."""

    pmap: ParameterMap
    minimal: np.ndarray
    dim: int = 2

    def __post_init__(self):
        x = np.asarray(self.minimal, dtype=float).copy()
        if x.shape != (self.pmap.n_params,):
            raise ValueError(f"expected {self.pmap.n_params} parameters, got {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "minimal", x)

    @property
    def index_map(self) -> ParameterMap:
        return self.pmap

    @property
    def fiducials(self) -> tuple[Sequence, ...]:
        return self.pmap.prep_fiducials

    @property
    def gate_labels(self) -> tuple[str, ...]:
        return self.pmap.gate_labels

    @property
    def e_tilde(self) -> np.ndarray:
        return self.minimal[self.pmap.e_meas]

    @property
    def e_tilde_prep(self) -> np.ndarray:
        return self.minimal[self.pmap.e_prep]

    @property
    def f_tilde(self) -> np.ndarray:
        return self.minimal[self.pmap.f]

    @property
    def g_tilde(self) -> dict[str, np.ndarray]:
        g = self.minimal[self.pmap.g]
        return {k: g[i] for i, k in enumerate(self.pmap.gate_labels)}

    def model(self) -> OperationalModel:
        return compile_model(self.pmap, self.minimal[None, :], self.dim)

    def probability(self, s: Sequence, clip: bool = False) -> float:
        return oprep_sequence_probability(self, s, clip=clip)

    def with_minimal(self, x) -> "OperationalRep":
        return OperationalRep(self.pmap, x, self.dim)


def build_operational_rep(gs: GateSet, fiducials: Iterable[Sequence],
                          meas_fiducials: Iterable[Sequence] | None = None) -> OperationalRep:
    """Operational representation of ``gs`` by direct simulation of each slot."""
    pmap = minimal_parameterization(gs.labels, fiducials, meas_fiducials)
    x = np.array([gs.probability(s) for s in pmap.slot_sequences])
    return OperationalRep(pmap, x, gs.dim)


def oprep_sequence_probability(rep: OperationalRep, s: Sequence, clip: bool = False) -> float:
    """``Tr(F~^-1 E~ E~^T F~^-1 G~(s_{m-1}) ... F~^-1 G~(s_0))``.

    The trace is evaluated as ``E~^T (F~^+ G~) ... (F~^+ G~) F~^+ E~`` with a
    rank-``d**2`` pseudo-inverse when there are more than ``d**2`` fiducials.
    """
    if not np.any(rep.f_tilde):
        raise ValueError("F~ is identically zero")
    p = float(rep.model().raw_probabilities([tuple(s)])[0, 0])
    return float(clip_probabilities(p)) if clip else p


# -- diagnostics ---------------------------------------------------------------

@dataclass(frozen=True)
class Completeness:
    complete: bool
    rank: int
    condition_number: float
    singular_values: np.ndarray


def numerical_rank(s: np.ndarray, shape: tuple[int, ...]) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > max(shape) * s[0] * RANK_RTOL))


def informational_completeness(rep, dim: int | None = None) -> Completeness:
    """Rank test ``rank(F~) >= d**2`` on an ``OperationalRep`` or raw ``F~``.

    ``condition_number`` is ``s_1 / s_{d^2}``, the conditioning of the part of
    ``F~`` that the trace formula inverts (``inf`` when incomplete).
    """
    if isinstance(rep, OperationalRep):
        f = rep.f_tilde
        dim = rep.dim if dim is None else dim
    else:
        f = np.asarray(rep, dtype=float)
        dim = 2 if dim is None else dim
    s = np.linalg.svd(f, compute_uv=False)
    rank = numerical_rank(s, f.shape)
    need = dim * dim
    complete = rank >= need
    cond = float(s[0] / s[need - 1]) if complete else float("inf")
    return Completeness(complete, rank, cond, s)


def lgst_reconstruct(rep: OperationalRep, b=None) -> GateSet:
    """Linear-inversion reconstruction ``rho = B F~^-1 E~``, ``E = E~^T B^-1``,
    ``G_k = B F~^-1 G~(k) B^-1``.

    Parameters
    ----------
    rep : OperationalRep
    b : array_like, optional
        Gauge.  A ``d^2 x n_prep`` matrix is used as the (generally unknown)
        map ``sum_j F_j |rho>> <j|``.  A ``d^2 x d^2`` matrix, or ``None`` for
        the identity, selects an arbitrary gauge; when there are more than
        ``d^2`` fiducials it acts after a rank-``d^2`` SVD factorization of
        ``F~``.

    Raises
    ------
    ValueError
        If ``F~`` has rank below ``d^2`` (incomplete fiducials).
    """
    d2 = rep.dim**2
    info = informational_completeness(rep)
    if not info.complete:
        raise ValueError(f"F~ has rank {info.rank} < {d2}; fiducials are not informationally complete")
    f = rep.f_tilde
    n_prep = f.shape[1]
    e_meas, e_prep, g = rep.e_tilde, rep.e_tilde_prep, rep.g_tilde
    f_pinv = truncated_pinv(f, d2)
    b = None if b is None else np.asarray(b, dtype=float)

    if b is not None and b.shape == (d2, n_prep):
        frame, outer = b, None
    elif n_prep == d2:
        frame, outer = (np.eye(d2) if b is None else b), None
    else:
        _, s, vt = np.linalg.svd(f)
        frame = np.sqrt(s[:d2])[:, None] * vt[:d2]
        outer = b
    if b is not None and b.shape not in ((d2, d2), (d2, n_prep)):
        raise ValueError(f"gauge must be {d2}x{d2} or {d2}x{n_prep}")
    if np.linalg.matrix_rank(frame) < d2:
        raise ValueError("gauge matrix is singular")
    frame_inv = np.linalg.pinv(frame)
    gs = GateSet(
        rho=frame @ f_pinv @ e_meas,
        effect=e_prep @ frame_inv,
        gates={k: frame @ f_pinv @ gk @ frame_inv for k, gk in g.items()},
    )
    if outer is not None:
        from .gateset import gauge_transform
        gs = gauge_transform(gs, outer)
    return gs


@dataclass(frozen=True)
class Positivity:
    positive: bool
    violations: list  # (sequence, raw probability)


def operational_positivity(obj, test_set: Iterable[Sequence], tol: float = POSITIVITY_TOL) -> Positivity:
    """Check that raw probabilities lie in ``[-tol, 1 + tol]`` on ``test_set``."""
    test_set = [tuple(s) for s in test_set]
    if isinstance(obj, GateSet):
        probs = [obj.probability(s) for s in test_set]
    else:
        probs = obj.model().raw_probabilities(test_set)[0] if test_set else []
    violations = [(s, float(p)) for s, p in zip(test_set, probs) if not (-tol <= p <= 1 + tol)]
    return Positivity(not violations, violations)


__all__ = [
    "EMPTY",
    "Completeness",
    "OperationalModel",
    "OperationalRep",
    "ParameterMap",
    "Positivity",
    "build_operational_rep",
    "clip_probabilities",
    "compile_model",
    "informational_completeness",
    "lgst_reconstruct",
    "minimal_parameterization",
    "operational_positivity",
    "oprep_sequence_probability",
    "truncated_pinv",
]
