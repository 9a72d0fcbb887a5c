"""Super-operator algebra in the normalized Pauli basis.

States and effects are real coefficient vectors ("super-kets") against the
orthonormal basis ``{P_i / sqrt(d)}`` ordered ``I, X, Y, Z`` (tensor products
for several qubits).  Channels are real Pauli transfer matrices (PTMs) acting
on those vectors.  Plain ``ndarray`` objects are used throughout: a 1-D array
of length ``d**2`` is a super-ket (or super-bra), a ``d**2 x d**2`` array is a
super-operator.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

PSD_TOL = 1e-10
UNITARY_TOL = 1e-10

_PAULI_1Q = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PHASE = np.array([[1, 0], [0, 1j]], dtype=complex)


def _n_qubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if dim < 2 or 2**n != dim:
        raise ValueError(f"Pauli basis needs a qubit dimension 2**n >= 2, got {dim}")
    return n


@lru_cache(maxsize=8)
def pauli_basis(dim: int = 2) -> np.ndarray:
    """Unnormalized Pauli matrices for ``dim = 2**n``, shape ``(dim**2, dim, dim)``."""
    n = _n_qubits(dim)
    mats = []
    for idx in itertools.product(range(4), repeat=n):
        m = np.ones((1, 1), dtype=complex)
        for k in idx:
            m = np.kron(m, _PAULI_1Q[k])
        mats.append(m)
    out = np.array(mats)
    out.setflags(write=False)
    return out


def dim_from_superket(vec: np.ndarray) -> int:
    d = int(round(np.sqrt(np.shape(vec)[-1])))
    if d * d != np.shape(vec)[-1]:
        raise ValueError(f"length {np.shape(vec)[-1]} is not a perfect square")
    return d


def to_superket(rho, dim: int | None = None, *, check_hermitian: bool = True) -> np.ndarray:
    """Coefficients ``Tr(P_i rho) / sqrt(d)`` of a Hermitian matrix.

    Parameters
    ----------
    rho : array_like
        ``d x d`` Hermitian matrix (density matrix or POVM effect).
    dim : int, optional
        Expected Hilbert dimension; checked against ``rho``.

    Returns
    -------
    ndarray
        Real vector of length ``d**2``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    d = rho.shape[0]
    if dim is not None and dim != d:
        raise ValueError(f"dimension mismatch: matrix is {d}x{d}, expected {dim}")
    if check_hermitian and not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("matrix is not Hermitian")
    coeffs = np.einsum("kij,ji->k", pauli_basis(d), rho) / np.sqrt(d)
    return coeffs.real.copy() if check_hermitian else coeffs


def from_superket(vec) -> np.ndarray:
    """Inverse of :func:`to_superket`; complex coefficients are accepted."""
    vec = np.asarray(vec)
    d = dim_from_superket(vec)
    return np.einsum("k,kij->ij", vec, pauli_basis(d)) / np.sqrt(d)


def pauli_transfer(channel, dim: int) -> np.ndarray:
    """PTM ``R_ij = Tr(P_i channel(P_j)) / d`` of a linear map on matrices."""
    basis = pauli_basis(dim)
    out = np.empty((dim**2, dim**2))
    for j, pj in enumerate(basis):
        image = channel(pj)
        out[:, j] = np.einsum("kij,ji->k", basis, image).real / dim
    return out


def unitary_superop(u) -> np.ndarray:
    """PTM of ``rho -> U rho U^dagger``.

    Raises
    ------
    ValueError
        If ``u`` is not unitary within ``1e-10``.
    """
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    if u.shape != (d, d) or not np.allclose(u @ u.conj().T, np.eye(d), atol=UNITARY_TOL):
        raise ValueError("operator is not unitary")
    basis = pauli_basis(d)
    images = u @ basis @ u.conj().T
    return np.einsum("iab,jba->ij", basis, images).real / d


def rotation(axis: str, angle: float) -> np.ndarray:
    """Single-qubit unitary ``exp(-i angle sigma_axis / 2)``."""
    idx = {"x": 1, "y": 2, "z": 3}[axis.lower()]
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * _PAULI_1Q[idx]


def rx(angle: float) -> np.ndarray:
    return unitary_superop(rotation("x", angle))


def ry(angle: float) -> np.ndarray:
    return unitary_superop(rotation("y", angle))


def rz(angle: float) -> np.ndarray:
    return unitary_superop(rotation("z", angle))


def identity_superop(dim: int = 2) -> np.ndarray:
    return np.eye(dim**2)


def _vec_to_pauli(dim: int) -> np.ndarray:
    # columns are column-stacked vec(P_i / sqrt(d))
    basis = pauli_basis(dim) / np.sqrt(dim)
    return np.stack([b.reshape(-1, order="F") for b in basis], axis=1)


def vec_superop_to_ptm(s: np.ndarray) -> np.ndarray:
    """Change basis from a column-stacking super-operator to the Pauli PTM."""
    d = int(round(np.sqrt(s.shape[0])))
    t = _vec_to_pauli(d)
    return (t.conj().T @ s @ t).real


def overrotated_hadamard(dtheta: float) -> np.ndarray:
    """PTM of the Hadamard evolved for ``pi/2 + dtheta`` under its generator.

    Built from the closed form
    ``cos^2(dt) H(x)H + sin^2(dt) I(x)I + (i/2) sin(2 dt) (I(x)H - H(x)I)``
    in the column-stacking representation, then rotated into the Pauli basis.
    """
    h = HADAMARD
    eye = np.eye(2)
    s = (
        np.cos(dtheta) ** 2 * np.kron(h, h)
        + np.sin(dtheta) ** 2 * np.kron(eye, eye)
        + 0.5j * np.sin(2 * dtheta) * (np.kron(eye, h) - np.kron(h, eye))
    )
    return vec_superop_to_ptm(s)


def depolarize(target, p: float) -> np.ndarray:
    """Left-multiply by ``diag(1, 1-p, ..., 1-p)``.

    Works for super-kets (shrinks the Bloch vector) and super-operators
    (appends a depolarizing channel).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing strength must lie in [0, 1], got {p}")
    target = np.asarray(target, dtype=float)
    scale = np.full(target.shape[0], 1.0 - p)
    scale[0] = 1.0
    if target.ndim == 1:
        return scale * target
    return scale[:, None] * target


def convex_mix(a, b, eps: float) -> np.ndarray:
    """``(1 - eps) a + eps b`` for matching states or channels."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {eps}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return (1.0 - eps) * a + eps * b


# -- Choi representation -------------------------------------------------------

def ptm_to_choi(ptm: np.ndarray) -> np.ndarray:
    """Choi matrix ``sum_ab |a><b| (x) Lambda(|a><b|)`` (input factor first)."""
    d = int(round(np.sqrt(ptm.shape[0])))
    basis = pauli_basis(d)
    # Lambda(|a><b|) via complex Pauli coefficients of the matrix unit
    choi = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[a, b] = 1.0
            c = np.einsum("kij,ji->k", basis, unit) / np.sqrt(d)
            image = np.einsum("k,kij->ij", ptm @ c, basis) / np.sqrt(d)
            choi[a * d:(a + 1) * d, b * d:(b + 1) * d] = image
    return choi


def choi_to_ptm(choi: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(choi.shape[0])))
    blocks = choi.reshape(d, d, d, d)  # [a, out1, b, out2]

    def channel(x):
        return np.einsum("ab,aibj->ij", x, blocks)

    return pauli_transfer(channel, d)


def is_trace_preserving(ptm: np.ndarray, tol: float = 1e-10) -> bool:
    first = np.zeros(ptm.shape[0])
    first[0] = 1.0
    return bool(np.allclose(ptm[0], first, atol=tol))


def is_completely_positive(ptm: np.ndarray, tol: float = PSD_TOL) -> bool:
    choi = ptm_to_choi(ptm)
    return bool(np.linalg.eigvalsh(0.5 * (choi + choi.conj().T)).min() >= -tol)


def is_density_superket(vec: np.ndarray, tol: float = 1e-9) -> bool:
    rho = from_superket(vec)
    ok_trace = abs(np.trace(rho).real - 1.0) <= tol
    return bool(ok_trace and np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -tol)


# -- random ensembles ---------------------------------------------------------

def sample_ginibre_density(dim: int, rng: np.random.Generator, real_only: bool = False) -> np.ndarray:
    """Ginibre-distributed density matrix ``X X^dag / Tr(X X^dag)``.

    For ``real_only`` the matrix ``X`` is real with shape ``d x (d+1)``,
    which gives the uniform (Hilbert-Schmidt) ensemble of rebits.
    """
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    if real_only:
        x = rng.standard_normal((dim, dim + 1))
    else:
        x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    w = x @ x.conj().T
    return w / np.trace(w).real


def sample_bcsz(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """CPTP channel PTM drawn from the BCSZ ensemble.

    A Ginibre matrix on the Choi space gives ``W = G G^dag``; the sandwich with
    ``(Tr_out W)^(-1/2)`` on the input factor enforces trace preservation.
    """
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    n = dim * dim
    rank = n if rank is None else rank
    g = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    w = g @ g.conj().T
    d_in = np.einsum("aibi->ab", w.reshape(dim, dim, dim, dim))
    vals, vecs = np.linalg.eigh(d_in)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
    left = np.kron(inv_sqrt, np.eye(dim))
    choi = left @ w @ left.conj().T
    ptm = choi_to_ptm(choi)
    # exact TP row; the construction guarantees it up to rounding
    ptm[0] = 0.0
    ptm[0, 0] = 1.0
    return ptm


ZERO_STATE = to_superket(np.array([[1, 0], [0, 0]]))
MAXIMALLY_MIXED = to_superket(np.eye(2) / 2)
