# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled chain-product kernel; see ``oqt.kernels`` for the contract."""

import numpy as np
from cython.parallel cimport prange


def chain_probabilities(const double[:, :, :, ::1] mats,
                        const double[:, ::1] left,
                        const double[:, ::1] right,
                        const long[::1] flat,
                        const long[::1] offsets,
                        int num_threads=1):
    cdef Py_ssize_t n_part = mats.shape[0]
    cdef Py_ssize_t f = mats.shape[2]
    cdef Py_ssize_t n_seq = offsets.shape[0] - 1
    out = np.empty((n_part, n_seq), dtype=np.float64)
    scratch = np.empty((n_part, 2, f), dtype=np.float64)
    cdef double[:, ::1] out_v = out
    cdef double[:, :, ::1] buf = scratch
    cdef Py_ssize_t n, s, t, i, j, b, cur
    cdef double acc

    for n in prange(n_part, nogil=True, num_threads=num_threads, schedule="static"):
        for s in range(n_seq):
            cur = 0
            for i in range(f):
                buf[n, 0, i] = right[n, i]
            for t in range(offsets[s], offsets[s + 1]):
                b = flat[t]
                for i in range(f):
                    acc = 0.0
                    for j in range(f):
                        acc = acc + mats[n, b, i, j] * buf[n, cur, j]
                    buf[n, 1 - cur, i] = acc
                cur = 1 - cur
            acc = 0.0
            for i in range(f):
                acc = acc + left[n, i] * buf[n, cur, i]
            out_v[n, s] = acc
    return out
