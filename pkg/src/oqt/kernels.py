"""Hot kernel selection: compiled extension when built, NumPy otherwise.

``chain_probabilities(mats, left, right, flat, offsets)`` evaluates, for every
particle ``n`` and every sequence ``s``::

    left[n] . mats[n, s_last] ... mats[n, s_0] . right[n]

where sequence ``s`` is ``flat[offsets[s]:offsets[s+1]]`` (alphabet indices,
applied left to right in time).  Shapes: ``mats (N, A, f, f)``,
``left/right (N, f)``; result ``(N, S)``.

Set ``OQT_KERNEL=python`` to force the fallback and ``OQT_NUM_THREADS`` to
control the compiled kernel's thread count.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def default_backend() -> str:
    forced = os.environ.get("OQT_KERNEL")
    if forced:
        if forced not in _BACKENDS:
            raise RuntimeError(f"OQT_KERNEL={forced!r} not available; have {available_backends()}")
        return forced
    return "cython" if "cython" in _BACKENDS else "python"


BACKEND = default_backend()


def num_threads() -> int:
    return max(1, int(os.environ.get("OQT_NUM_THREADS", "1")))


def encode_sequences(sequences, alphabet) -> tuple[np.ndarray, np.ndarray]:
    """Flatten label sequences to alphabet indices plus offsets."""
    index = {label: i for i, label in enumerate(alphabet)}
    lengths = [len(s) for s in sequences]
    offsets = np.zeros(len(sequences) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    try:
        flat = np.fromiter((index[b] for s in sequences for b in s), dtype=np.int64,
                           count=int(offsets[-1]))
    except KeyError as exc:
        raise KeyError(f"unknown button label {exc.args[0]!r}") from None
    return flat, offsets


def chain_probabilities(mats, left, right, flat, offsets, backend: str | None = None) -> np.ndarray:
    impl = _BACKENDS[backend or BACKEND]
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    left = np.ascontiguousarray(left, dtype=np.float64)
    right = np.ascontiguousarray(right, dtype=np.float64)
    flat = np.ascontiguousarray(flat, dtype=np.int64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    if mats.ndim != 4 or left.shape != right.shape or left.shape != (mats.shape[0], mats.shape[2]):
        raise ValueError("inconsistent kernel operand shapes")
    if flat.size and (flat.min() < 0 or flat.max() >= mats.shape[1]):
        raise IndexError("alphabet index out of range")
    return impl.chain_probabilities(mats, left, right, flat, offsets, num_threads())
