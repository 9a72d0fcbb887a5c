"""Compare the compiled and NumPy likelihood kernels on a particle workload.

    python3 benchmarks/bench_kernels.py [--particles 2000] [--sequences 200] [--length 40]

Prints one line per backend with the median wall time and the maximum
absolute difference from the NumPy result.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from oqt import kernels


def workload(n: int, n_seq: int, length: int, alphabet: int = 3, f: int = 4, seed: int = 0):
    rng = np.random.default_rng(seed)
    # near-orthogonal transfer matrices keep long products bounded
    q, _ = np.linalg.qr(rng.normal(size=(n, alphabet, f, f)))
    mats = 0.999 * q
    left = rng.normal(size=(n, f))
    right = rng.normal(size=(n, f))
    lengths = rng.integers(length // 2, length + 1, size=n_seq)
    flat = rng.integers(0, alphabet, size=int(lengths.sum())).astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    return mats, left, right, flat, offsets


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--particles", type=int, default=2000)
    parser.add_argument("--sequences", type=int, default=200)
    parser.add_argument("--length", type=int, default=40)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    ops = workload(args.particles, args.sequences, args.length)
    reference = kernels.chain_probabilities(*ops, backend="python")
    print(f"particles={args.particles} sequences={args.sequences} max_length={args.length} "
          f"threads={kernels.num_threads()}")
    timings = {}
    for backend in kernels.available_backends():
        out = kernels.chain_probabilities(*ops, backend=backend)
        times = timeit.repeat(lambda: kernels.chain_probabilities(*ops, backend=backend),
                              number=1, repeat=args.repeat)
        timings[backend] = float(np.median(times))
        print(f"{backend:8s} median {timings[backend] * 1e3:9.2f} ms   "
              f"max |diff| {np.max(np.abs(out - reference)):.2e}")
    if "cython" in timings:
        print(f"speedup  {timings['python'] / timings['cython']:.2f}x")


if __name__ == "__main__":
    main()
