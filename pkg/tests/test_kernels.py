"""The compiled kernels and the pure-Python fallback must agree."""
import numpy as np
import pytest

from fracstab import _backend, _fallback
from fracstab.sim import gl_weights

kernels = pytest.importorskip("fracstab._kernels")


def test_backend_selection():
    assert _backend.BACKEND in ("cython", "python")


@pytest.mark.parametrize("n", [1, 2, 3, 6, 12, 25])
def test_eigvals_parity(rng, n):
    for _ in range(4):
        M = rng.normal(size=(n, n))
        wr1, wi1 = kernels.eigvals(M)
        wr2, wi2 = _fallback.eigvals(M)
        np.testing.assert_allclose(wr1, wr2, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(wi1, wi2, rtol=1e-12, atol=1e-12)


def test_eigvals_sweep_limit(rng):
    M = rng.normal(size=(6, 6))
    for impl in (kernels, _fallback):
        with pytest.raises(_fallback.ConvergenceError):
            impl.eigvals(M, 0)


@pytest.mark.parametrize("scale", [1e-150, 1e-141, 1e140])
def test_extreme_magnitudes(rng, scale):
    M = rng.normal(size=(4, 4))
    wr, wi = _backend.eigvals(scale * M)
    ref = np.linalg.eigvals(M)
    got = (np.asarray(wr) + 1j * np.asarray(wi)) / scale
    assert np.allclose(np.sort_complex(got), np.sort_complex(ref), atol=1e-10)


def _graded_cases():
    # column whose squared norm underflows
    a = np.zeros((7, 7))
    a[2, 1] = 1.947487560024703e-125
    a[4, 0] = 44815421024059.0
    # balancing shrinks this one toward the subnormal range
    b = np.full((3, 3), 3.37978034e-263)
    b[1, 2] = 1.56029910e-55
    c = np.full((4, 4), 1.11253693e-308)
    c[0, 1] = 1.0
    return [a, b, c]


@pytest.mark.parametrize("impl", ["compiled", "fallback"])
@pytest.mark.parametrize("case", range(3))
def test_widely_graded_entries(impl, case):
    M = _graded_cases()[case]
    mod = kernels if impl == "compiled" else _fallback
    # route through the backend wrapper with the chosen kernel
    saved = _backend._impl
    _backend._impl = mod
    try:
        wr, wi = _backend.eigvals(M)
    finally:
        _backend._impl = saved
    lam = np.asarray(wr) + 1j * np.asarray(wi)
    assert np.all(np.isfinite(lam))
    # backward stable; defective eigenvalues move by up to sqrt(ulp) * |M|
    ref = np.linalg.eigvals(M)
    err = np.max(np.abs(np.sort_complex(lam) - np.sort_complex(ref)))
    assert err <= np.sqrt(np.finfo(float).eps) * np.abs(M).max()


@pytest.mark.parametrize("memory", [None, 7])
def test_gl_march_parity(rng, memory):
    N, steps = 5, 300
    A = rng.normal(size=(N, N)) * 0.3
    h_a = 0.01**0.4
    forcing = rng.normal(size=(steps + 1, N)) * 0.01
    w = gl_weights(0.4, steps + 1)
    z0 = rng.normal(size=N)
    mem = steps if memory is None else memory
    args = (np.eye(N), h_a * A, forcing, w, z0, mem, 1e12)
    Z1, k1 = kernels.gl_march(*args)
    Z2, k2 = _fallback.gl_march(*args)
    assert k1 == k2 == steps
    np.testing.assert_allclose(Z1, Z2, rtol=1e-12, atol=1e-12)


def test_gl_march_divergence_parity():
    A = np.array([[5.0]])
    steps = 2000
    args = (np.eye(1), 0.1 * A, np.zeros((steps + 1, 1)), gl_weights(0.5, steps + 1), np.ones(1), steps, 1e6)
    Z1, k1 = kernels.gl_march(*args)
    Z2, k2 = _fallback.gl_march(*args)
    assert k1 == k2 < steps
    np.testing.assert_allclose(Z1[: k1 + 1], Z2[: k2 + 1], rtol=1e-12)
