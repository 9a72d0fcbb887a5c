from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oqt import kernels


def reference(mats, left, right, flat, offsets):
    n, s = mats.shape[0], len(offsets) - 1
    out = np.empty((n, s))
    for i in range(n):
        for j in range(s):
            v = right[i]
            for a in flat[offsets[j]:offsets[j + 1]]:
                v = mats[i, a] @ v
            out[i, j] = left[i] @ v
    return out


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 6))
def test_backends_match_loop_oracle(seed, n, n_seq):
    rng = np.random.default_rng(seed)
    mats = rng.normal(size=(n, 3, 4, 4)) * 0.5
    left, right = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
    seqs = [tuple(rng.integers(0, 3, size=rng.integers(0, 8))) for _ in range(n_seq)]
    flat, offsets = kernels.encode_sequences(seqs, (0, 1, 2))
    expected = reference(mats, left, right, flat, offsets)
    for backend in kernels.available_backends():
        got = kernels.chain_probabilities(mats, left, right, flat, offsets, backend=backend)
        assert np.allclose(got, expected, rtol=1e-12, atol=1e-12)


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.BACKEND in kernels.available_backends()


def test_kernel_input_validation():
    mats = np.zeros((2, 1, 4, 4))
    with pytest.raises(ValueError):
        kernels.chain_probabilities(mats, np.zeros((2, 3)), np.zeros((2, 3)), np.zeros(0, int), np.zeros(1, int))
    with pytest.raises(IndexError):
        kernels.chain_probabilities(mats, np.zeros((2, 4)), np.zeros((2, 4)), np.array([1]), np.array([0, 1]))
    with pytest.raises(KeyError):
        kernels.encode_sequences([("x",)], ("a",))


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv("OQT_NUM_THREADS", "3")
    assert kernels.num_threads() == 3
    monkeypatch.delenv("OQT_NUM_THREADS")
    assert kernels.num_threads() == 1
