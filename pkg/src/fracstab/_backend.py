"""Selects the compiled kernels when importable, else the numpy fallback.

Set ``FRACSTAB_PURE_PYTHON=1`` to force the fallback.
"""
import math
import os

import numpy as np

from . import _fallback

if os.environ.get("FRACSTAB_PURE_PYTHON"):
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND = "cython" if _impl is not _fallback else "python"
_FLUSH = math.sqrt(_fallback.SAFMIN)


def eigvals(m, sweeps_per_dim=100):
    """Eigenvalues as ``(wr, wi)``.

    The matrix is first scaled by a power of two so its largest entry is
    near 1 (exact, and undone on the eigenvalues afterwards).
    """
    m = np.array(m, dtype=np.float64, order="C")
    peak = float(np.max(np.abs(m))) if m.size else 0.0
    if peak == 0.0 or not np.isfinite(peak):
        return _impl.eigvals(m, sweeps_per_dim)
    e = math.frexp(peak)[1]
    m = np.ldexp(m, -e)
    # entries this far below the norm are far below rounding error; dropping
    # them keeps balancing and the QR sweeps away from subnormal arithmetic
    m[np.abs(m) < _FLUSH] = 0.0
    wr, wi = _impl.eigvals(m, sweeps_per_dim)
    return np.ldexp(np.asarray(wr), e), np.ldexp(np.asarray(wi), e)


def gl_march(left, right, forcing, weights, z0, memory, threshold):
    # writable contiguous copies; the compiled kernel rejects read-only buffers
    arrs = [np.array(a, dtype=np.float64, order="C") for a in (left, right, forcing, weights, z0)]
    return _impl.gl_march(*arrs, int(memory), float(threshold))


ConvergenceError = _fallback.ConvergenceError
