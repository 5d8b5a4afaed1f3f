"""Time the compiled detection kernels against the NumPy fallback.

Run with ``python benchmarks/bench_kernels.py``.
"""

import argparse
import timeit

import numpy as np

from ucaris import kernels
from ucaris.transceiver import QPSK


def _cases(rng, trials, n, candidates):
    y = rng.normal(size=(trials, n)) + 1j * rng.normal(size=(trials, n))
    g = rng.normal(size=n) + 1j * rng.normal(size=n)
    out = rng.normal(size=(candidates, n)) + 1j * rng.normal(size=(candidates, n))
    return y, g, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--candidates", type=int, default=256)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    y, g, out = _cases(np.random.default_rng(0), args.trials, args.n, args.candidates)
    print(f"trials={args.trials} n={args.n} candidates={args.candidates}")
    print(f"{'kernel':<24}{'backend':<10}{'best ms':>10}")
    for name in kernels.available_backends():
        mod = kernels.get_backend(name)

        def symbolwise():
            mod.nearest_symbol_indices(y, g, QPSK.symbols)

        def exhaustive():
            dist = np.full(args.trials, np.inf)
            idx = np.zeros(args.trials, dtype=np.intp)
            mod.update_best_candidates(y, out, dist, idx, 0)

        for label, fn in (("nearest_symbol_indices", symbolwise),
                          ("update_best_candidates", exhaustive)):
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            print(f"{label:<24}{name:<10}{best * 1e3:>10.2f}")


if __name__ == "__main__":
    main()
