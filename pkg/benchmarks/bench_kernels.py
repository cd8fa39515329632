"""Compare the compiled kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--seed 0]

Times the QR eigenvalue solver on random lifted-size matrices and the
Grünwald-Letnikov march on a stable random system, and checks that both
backends return the same numbers.
"""
import argparse
import sys
import timeit

import numpy as np

from fracstab import _fallback
from fracstab.sim import gl_weights

try:
    from fracstab import _kernels
except ImportError:
    _kernels = None


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def _as_complex(parts):
    wr, wi = parts
    return np.sort_complex(np.asarray(wr) + 1j * np.asarray(wi))


def bench_eigvals(rng, sizes, repeat):
    rows = []
    for n in sizes:
        M = rng.normal(size=(n, n))
        t_py = _best(lambda: _fallback.eigvals(M), repeat)
        t_cy = _best(lambda: _kernels.eigvals(M), repeat)
        a, b = (_as_complex(impl.eigvals(M)) for impl in (_fallback, _kernels))
        rows.append((f"eigvals n={n}", t_py, t_cy, float(np.max(np.abs(a - b)))))
    return rows


def bench_gl_march(rng, cases, repeat):
    rows = []
    for N, steps in cases:
        A = rng.normal(size=(N, N))
        A -= (np.max(np.linalg.eigvals(A).real) + 1.0) * np.eye(N)
        h, alpha = 1e-2, 0.5
        left = np.eye(N)
        right = h**alpha * A
        forcing = np.zeros((steps + 1, N))
        weights = gl_weights(alpha, steps + 1)
        z0 = rng.normal(size=N)
        args = (left, right, forcing, weights, z0, steps, 1e12)
        t_py = _best(lambda: _fallback.gl_march(*args), repeat)
        t_cy = _best(lambda: _kernels.gl_march(*args), repeat)
        diff = float(np.max(np.abs(_fallback.gl_march(*args)[0] - _kernels.gl_march(*args)[0])))
        rows.append((f"gl_march N={N} steps={steps}", t_py, t_cy, diff))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    rows = bench_eigvals(rng, (8, 32, 64), args.repeat)
    rows += bench_gl_march(rng, ((4, 1000), (8, 2000), (16, 1000)), args.repeat)
    print(f"{'kernel':<28}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, t_py, t_cy, diff in rows:
        print(f"{name:<28}{t_py:>12.4g}{t_cy:>12.4g}{t_py / t_cy:>10.1f}{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
