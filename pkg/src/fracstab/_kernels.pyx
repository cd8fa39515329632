# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: QR eigenvalue iteration and Grünwald-Letnikov stepping.

Same algorithms and signatures as ``_fallback``.
"""
import math

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, copysign, isfinite

cnp.import_array()

cdef double RADIX = 2.0
cdef double SAFMIN = 2.2250738585072014e-308
cdef double ULP = 2.220446049250313e-16


from fracstab._fallback import ConvergenceError


cdef void _balance(double[:, ::1] a) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], i, j
    cdef double s, r, g, f, c, sqrdx = RADIX * RADIX
    cdef bint done = False
    while not done:
        done = True
        for i in range(n):
            r = 0.0
            c = 0.0
            for j in range(n):
                if j != i:
                    c += fabs(a[j, i])
                    r += fabs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / RADIX
                f = 1.0
                s = c + r
                while c < g:
                    f *= RADIX
                    c *= sqrdx
                g = r * RADIX
                while c > g:
                    f /= RADIX
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f


cdef void _hessenberg(double[:, ::1] a, double[::1] v) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], i, j, k
    cdef double alpha, vnorm2, beta, s, scl
    for k in range(n - 2):
        # the reflector is scale invariant; work with the column over its peak
        # so the squared norm cannot underflow or overflow
        scl = 0.0
        for i in range(k + 1, n):
            if fabs(a[i, k]) > scl:
                scl = fabs(a[i, k])
        if scl == 0.0:
            continue
        alpha = 0.0
        for i in range(k + 1, n):
            alpha += (a[i, k] / scl) * (a[i, k] / scl)
        alpha = sqrt(alpha)
        if a[k + 1, k] > 0:
            alpha = -alpha
        for i in range(n):
            v[i] = 0.0
        v[k + 1] = a[k + 1, k] / scl - alpha
        for i in range(k + 2, n):
            v[i] = a[i, k] / scl
        vnorm2 = 0.0
        for i in range(k + 1, n):
            vnorm2 += v[i] * v[i]
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        for j in range(k, n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * a[i, j]
            s *= beta
            for i in range(k + 1, n):
                a[i, j] -= s * v[i]
        for i in range(n):
            s = 0.0
            for j in range(k + 1, n):
                s += a[i, j] * v[j]
            s *= beta
            for j in range(k + 1, n):
                a[i, j] -= s * v[j]
        for i in range(k + 2, n):
            a[i, k] = 0.0


cdef long _hqr(double[:, ::1] a, Py_ssize_t n, double[::1] wr, double[::1] wi,
               long max_sweeps) noexcept nogil:
    """1-based Francis double-shift QR on ``a`` of shape (n+1, n+1).

    Returns the sweep count, or -1 on non-convergence.
    """
    cdef Py_ssize_t nn, m, l, ll, k, j, i, mmin
    cdef long its, sweeps = 0
    cdef double z = 0.0, y = 0.0, x = 0.0, w = 0.0, v, u, t, s, r = 0.0, q = 0.0, p = 0.0, anorm
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(i - 1 if i > 1 else 1, n + 1):
            anorm += fabs(a[i, j])
    # absolute deflation floor, as in LAPACK's dlahqr: safmin * n / ulp
    cdef double small = SAFMIN * n / ULP
    nn = n
    t = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            ll = nn
            while ll >= 2:
                s = fabs(a[ll - 1, ll - 1]) + fabs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if fabs(a[ll, ll - 1]) + s == s or fabs(a[ll, ll - 1]) <= small:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
                ll -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = sqrt(fabs(q))
                    x += t
                    if q >= 0.0:
                        z = p + copysign(z, p)
                        wr[nn - 1] = x + z
                        wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = 0.0
                        wi[nn] = 0.0
                    else:
                        wr[nn - 1] = x + p
                        wr[nn] = x + p
                        wi[nn] = z
                        wi[nn - 1] = -z
                    nn -= 2
                else:
                    if sweeps >= max_sweeps:
                        return -1
                    if its != 0 and its % 10 == 0:
                        t += x
                        for i in range(1, nn + 1):
                            a[i, i] -= x
                        s = fabs(a[nn, nn - 1]) + fabs(a[nn - 1, nn - 2])
                        x = 0.75 * s
                        y = x
                        w = -0.4375 * s * s
                    its += 1
                    sweeps += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = fabs(p) + fabs(q) + fabs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = fabs(a[m, m - 1]) * (fabs(q) + fabs(r))
                        v = fabs(p) * (fabs(a[m - 1, m - 1]) + fabs(z) + fabs(a[m + 1, m + 1]))
                        if u + v == v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i, i - 2] = 0.0
                        if i != m + 2:
                            a[i, i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = 0.0
                            if k != nn - 1:
                                r = a[k + 2, k - 1]
                            x = fabs(p) + fabs(q) + fabs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = copysign(sqrt(p * p + q * q + r * r), p)
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k, k - 1] = -a[k, k - 1]
                            else:
                                a[k, k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k, j] + q * a[k + 1, j]
                                if k != nn - 1:
                                    p += r * a[k + 2, j]
                                    a[k + 2, j] -= p * z
                                a[k + 1, j] -= p * y
                                a[k, j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i, k] + y * a[i, k + 1]
                                if k != nn - 1:
                                    p += z * a[i, k + 2]
                                    a[i, k + 2] -= p * r
                                a[i, k + 1] -= p * q
                                a[i, k] -= p
            if l >= nn - 1:
                break
    return sweeps


def eigvals(m, long sweeps_per_dim=100):
    """Real and imaginary parts of the eigenvalues of a real square matrix."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] a = np.array(m, dtype=np.float64, order="C")
    cdef Py_ssize_t n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros(0)
    cdef double[::1] work = np.zeros(n)
    _balance(a)
    # balancing can shrink the whole matrix; bring the largest entry back near 1
    cdef double peak = np.max(np.abs(a))
    cdef int e = math.frexp(peak)[1] if peak else 0
    a = np.ldexp(a, -e)
    _hessenberg(a, work)
    padded_arr = np.zeros((n + 1, n + 1))
    padded_arr[1:, 1:] = a
    cdef double[:, ::1] padded = padded_arr
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    cdef double[::1] wr_v = wr, wi_v = wi
    cdef long sweeps
    with nogil:
        sweeps = _hqr(padded, n, wr_v, wi_v, sweeps_per_dim * n)
    if sweeps < 0:
        raise ConvergenceError(
            f"QR iteration did not converge after {sweeps_per_dim * n} sweeps"
        )
    return np.ldexp(wr[1:], e), np.ldexp(wi[1:], e)


def gl_march(left, right, forcing, weights, z0, Py_ssize_t memory, double threshold):
    """Grünwald-Letnikov stepping; see ``_fallback.gl_march``."""
    cdef double[:, ::1] L = np.ascontiguousarray(left, dtype=np.float64)
    cdef double[:, ::1] R = np.ascontiguousarray(right, dtype=np.float64)
    cdef double[:, ::1] F = np.ascontiguousarray(forcing, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(z0, dtype=np.float64)
    cdef Py_ssize_t steps = F.shape[0] - 1, n = z.shape[0]
    Zarr = np.zeros((steps + 1, n))
    cdef double[:, ::1] Z = Zarr
    cdef double[:, ::1] D = np.zeros((steps + 1, n))
    cdef double[::1] rhs = np.zeros(n)
    cdef Py_ssize_t k, j, i, c, mem
    cdef double wj, acc, peak
    cdef bint use_right = bool(np.any(np.asarray(right)))
    for i in range(n):
        Z[0, i] = z[i]
    with nogil:
        for k in range(1, steps + 1):
            mem = k if k < memory else memory
            for i in range(n):
                rhs[i] = z[i] + F[k, i]
            for j in range(1, mem + 1):
                wj = w[j]
                for i in range(n):
                    rhs[i] -= wj * D[k - j, i]
            peak = 0.0
            for i in range(n):
                acc = 0.0
                for c in range(n):
                    acc += L[i, c] * rhs[c]
                if use_right:
                    for c in range(n):
                        acc += R[i, c] * Z[k - 1, c]
                Z[k, i] = acc
                D[k, i] = acc - z[i]
                if not isfinite(acc):
                    peak = acc
                elif isfinite(peak) and fabs(acc) > peak:
                    peak = fabs(acc)
            if not isfinite(peak) or peak > threshold:
                with gil:
                    return Zarr, k
    return Zarr, steps
