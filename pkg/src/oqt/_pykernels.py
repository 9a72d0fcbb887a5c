"""NumPy implementation of the chain-product kernel (always available)."""

import numpy as np


def chain_probabilities(mats, left, right, flat, offsets, num_threads=1):
    n_seq = len(offsets) - 1
    out = np.empty((mats.shape[0], n_seq))
    for s in range(n_seq):
        v = right
        for b in flat[offsets[s]:offsets[s + 1]]:
            v = np.einsum("nij,nj->ni", mats[:, b], v)
        out[:, s] = np.einsum("ni,ni->n", left, v)
    return out
