"""Pure Python / numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` line for line and are used whenever the
compiled extension is unavailable.
"""
import math

import numpy as np

RADIX = 2.0


class ConvergenceError(RuntimeError):
    pass


def balance(a):
    """Diagonal similarity scaling by powers of two (in place, list of lists)."""
    n = len(a)
    sqrdx = RADIX * RADIX
    done = False
    while not done:
        done = True
        for i in range(n):
            r = c = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j][i])
                    r += abs(a[i][j])
            if c and r:
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
                        a[i][j] *= g
                    for j in range(n):
                        a[j][i] *= f


def hessenberg(a):
    """Householder reduction to upper Hessenberg form (in place, list of lists)."""
    n = len(a)
    for k in range(n - 2):
        # the reflector is scale invariant; work with the column over its peak
        # so the squared norm cannot underflow or overflow
        scl = 0.0
        for i in range(k + 1, n):
            scl = max(scl, abs(a[i][k]))
        if scl == 0.0:
            continue
        alpha = 0.0
        for i in range(k + 1, n):
            alpha += (a[i][k] / scl) ** 2
        alpha = math.sqrt(alpha)
        if a[k + 1][k] > 0:
            alpha = -alpha
        v = [0.0] * n
        v[k + 1] = a[k + 1][k] / scl - alpha
        for i in range(k + 2, n):
            v[i] = a[i][k] / scl
        vnorm2 = 0.0
        for i in range(k + 1, n):
            vnorm2 += v[i] * v[i]
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        # H A
        for j in range(k, n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * a[i][j]
            s *= beta
            for i in range(k + 1, n):
                a[i][j] -= s * v[i]
        # (H A) H
        for i in range(n):
            s = 0.0
            for j in range(k + 1, n):
                s += a[i][j] * v[j]
            s *= beta
            for j in range(k + 1, n):
                a[i][j] -= s * v[j]
        for i in range(k + 2, n):
            a[i][k] = 0.0


SAFMIN = 2.2250738585072014e-308
ULP = 2.220446049250313e-16


def hqr(h, max_sweeps):
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    ``h`` is a list of lists and is destroyed. Returns ``(wr, wi, sweeps)``.
    Conjugate pairs come out with identical real parts and negated
    imaginary parts.
    """
    n = len(h)
    # 1-based working copy keeps the index arithmetic of the classic algorithm
    a = [[0.0] * (n + 1)] + [[0.0] + list(row) for row in h]
    wr = [0.0] * (n + 1)
    wi = [0.0] * (n + 1)
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i][j])
    # absolute deflation floor, as in LAPACK's dlahqr: safmin * n / ulp
    small = SAFMIN * n / ULP
    nn = n
    t = 0.0
    sweeps = 0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1][ll - 1]) + abs(a[ll][ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll][ll - 1]) + s == s or abs(a[ll][ll - 1]) <= small:
                    a[ll][ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn][nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1][nn - 1]
                w = a[nn][nn - 1] * a[nn - 1][nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + math.copysign(z, p)
                        wr[nn - 1] = wr[nn] = x + z
                        if z:
                            wr[nn] = x - w / z
                        wi[nn - 1] = wi[nn] = 0.0
                    else:
                        wr[nn - 1] = wr[nn] = x + p
                        wi[nn] = z
                        wi[nn - 1] = -z
                    nn -= 2
                else:
                    if sweeps >= max_sweeps:
                        raise ConvergenceError(
                            f"QR iteration did not converge after {sweeps} sweeps "
                            f"({nn} eigenvalues outstanding)"
                        )
                    if its and its % 10 == 0:
                        # exceptional shift
                        t += x
                        for i in range(1, nn + 1):
                            a[i][i] -= x
                        s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                        y = x = 0.75 * s
                        w = -0.4375 * s * s
                    its += 1
                    sweeps += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m][m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                        q = a[m + 1][m + 1] - z - r - s
                        r = a[m + 2][m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                        if u + v == v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i][i - 2] = 0.0
                        if i != m + 2:
                            a[i][i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k][k - 1]
                            q = a[k + 1][k - 1]
                            r = 0.0
                            if k != nn - 1:
                                r = a[k + 2][k - 1]
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k][k - 1] = -a[k][k - 1]
                            else:
                                a[k][k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k][j] + q * a[k + 1][j]
                                if k != nn - 1:
                                    p += r * a[k + 2][j]
                                    a[k + 2][j] -= p * z
                                a[k + 1][j] -= p * y
                                a[k][j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i][k] + y * a[i][k + 1]
                                if k != nn - 1:
                                    p += z * a[i][k + 2]
                                    a[i][k + 2] -= p * r
                                a[i][k + 1] -= p * q
                                a[i][k] -= p
            if l >= nn - 1:
                break
    return wr[1:], wi[1:], sweeps


def eigvals(m, sweeps_per_dim=100):
    """Real and imaginary parts of the eigenvalues of a real square matrix."""
    a = np.array(m, dtype=float).tolist()
    n = len(a)
    if n == 0:
        return np.zeros(0), np.zeros(0)
    balance(a)
    # balancing can shrink the whole matrix; bring the largest entry back near 1
    e = _peak_exponent(a)
    a = [[math.ldexp(v, -e) for v in row] for row in a]
    hessenberg(a)
    wr, wi, _ = hqr(a, sweeps_per_dim * n)
    return np.ldexp(np.array(wr), e), np.ldexp(np.array(wi), e)


def _peak_exponent(a):
    peak = max(abs(v) for row in a for v in row)
    return math.frexp(peak)[1] if peak else 0


def gl_march(left, right, forcing, weights, z0, memory, threshold):
    """Grünwald-Letnikov time stepping on the shifted variable ``Z - z0``.

    ``Z_k = left @ (z0 - sum_{j=1}^{min(k, memory)} w_j (Z_{k-j} - z0) + forcing[k])
    + right @ Z_{k-1}``.  Stops early once ``max|Z_k| > threshold`` or a
    non-finite value appears.  Returns ``(Z, completed_steps)`` where rows
    beyond ``completed_steps`` are zero.
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    forcing = np.asarray(forcing, dtype=float)
    weights = np.asarray(weights, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    steps = forcing.shape[0] - 1
    n = z0.shape[0]
    Z = np.zeros((steps + 1, n))
    D = np.zeros((steps + 1, n))
    Z[0] = z0
    use_right = bool(np.any(right))
    for k in range(1, steps + 1):
        m = min(k, memory)
        # rows k-1 ... k-m of D against w_1 ... w_m
        hist = weights[1 : m + 1] @ D[k - 1 : k - m - 1 if k - m - 1 >= 0 else None : -1]
        rhs = z0 - hist + forcing[k]
        zk = left @ rhs
        if use_right:
            zk = zk + right @ Z[k - 1]
        Z[k] = zk
        D[k] = zk - z0
        peak = np.max(np.abs(zk)) if n else 0.0
        if not np.isfinite(peak) or peak > threshold:
            return Z, k
    return Z, steps
