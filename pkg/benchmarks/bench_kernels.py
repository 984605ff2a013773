"""Compare the compiled kernels with their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from gcica import _kernels_py

try:
    from gcica import _kernels as compiled
except ImportError:
    compiled = None


def cases(rng):
    m = 2000
    c = np.corrcoef(rng.standard_normal((m, 50)))
    yield "threshold_components M=2000", lambda k: k.threshold_components(c, 0.3, False)

    m, kk, p = 5400, 10, 100
    nbrs = np.ascontiguousarray(rng.integers(0, m, (m, kk)), dtype=np.intp)
    vals = rng.random((m, kk))
    labels = np.ascontiguousarray(np.vstack([rng.permutation(np.repeat(np.arange(270), 20)) for _ in range(p)]),
                                  dtype=np.intp)
    yield "knn_match_sums M=5400 k=10 P=100", lambda k: k.knn_match_sums(nbrs, vals, labels)

    z = rng.standard_normal((10, 200))
    target = rng.uniform(0.1, 1.0, 200)
    yield "prox_columns 10x200", lambda k: k.prox_columns(z, 0.05, target)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'numpy [ms]':>11s} {'compiled [ms]':>14s} {'speedup':>8s}")
    for name, call in cases(rng):
        t_py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:36s} {t_py:11.3f} {'n/a':>14s} {'':>8s}")
            continue
        np.testing.assert_allclose(call(compiled), call(_kernels_py), rtol=1e-10, atol=1e-12)
        t_c = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:36s} {t_py:11.3f} {t_c:14.3f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
