"""Compare the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each workload is run on both backends, the outputs are checked for equality,
and the best-of-N wall time is reported.
"""

import argparse
import math
import timeit

import numpy as np

from arbgeom import _pykernels, sufficiency

try:
    from arbgeom import _ckernels
except ImportError:
    _ckernels = None


def workloads():
    inf = math.inf
    yield "boyling_characteristic (s=1, h=1e-3)", "boyling_characteristic", (0.0, 0.5, 1.0, 1e-3, -inf, inf, -inf, inf)

    # consistent complete graphs: no negative cycle to stop at
    rng = np.random.default_rng(0)
    for n in (8, 60):
        pi = rng.uniform(-1, 1, n)
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        src = np.array([i for i, _ in pairs], dtype=np.int64)
        dst = np.array([j for _, j in pairs], dtype=np.int64)
        w = np.array([pi[i] - pi[j] for i, j in pairs])
        yield f"bellman_ford (complete, {n} nodes)", "bellman_ford", (n, src, dst, w, 1e-9 / (2 * n))

    fam = sufficiency.DiscreteFamily.mixture([0.7, 0.2, 0.1], [0.1, 0.3, 0.6], [k / 10 for k in range(1, 10)])
    _, loglik = sufficiency._enumerate(fam, 8)
    profiles = np.ascontiguousarray(loglik[:, 1:] - loglik[:, :1])
    yield "assign_classes (mixture, n=8)", "assign_classes", (profiles, math.log1p(1e-9))


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the fallback is available")

    print(f"{'workload':42} {'python':>10} {'cython':>10} {'speedup':>8}")
    for label, name, fargs in workloads():
        py = getattr(_pykernels, name)
        t_py = min(timeit.repeat(lambda: py(*fargs), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{label:42} {t_py * 1e3:9.2f}ms {'-':>10} {'-':>8}")
            continue
        cy = getattr(_ckernels, name)
        if not same(py(*fargs), cy(*fargs)):
            raise SystemExit(f"{label}: backends disagree")
        t_cy = min(timeit.repeat(lambda: cy(*fargs), number=1, repeat=args.repeat))
        print(f"{label:42} {t_py * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
