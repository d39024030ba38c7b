# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernels.

Scaling-and-squaring Pade [7/7] matrix exponential plus left-to-right
composition, specialised for the small dense matrices (2n <= 32) that
fundamental-solution integration produces. The pure-Python twin lives in
``fallback.py``; both must return identical results up to roundoff.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, fabs, log2
from libc.string cimport memcpy, memset

cnp.import_array()

IMPLEMENTATION = "compiled"

MAXDIM = 32

# Pade [7/7] numerator coefficients; theta_7 is the standard double-precision
# scaling threshold for this order.
cdef double B0 = 17297280.0
cdef double B1 = 8648640.0
cdef double B2 = 1995840.0
cdef double B3 = 277200.0
cdef double B4 = 25200.0
cdef double B5 = 1512.0
cdef double B6 = 56.0
cdef double B7 = 1.0
cdef double THETA7 = 0.95

cdef void _matmul(const double* a, const double* b, double* c, int m) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(m):
        for j in range(m):
            acc = 0.0
            for k in range(m):
                acc += a[i * m + k] * b[k * m + j]
            c[i * m + j] = acc

cdef int _solve(double* a, double* b, int m) noexcept nogil:
    """Solve a @ x = b in place (b becomes x), partial pivoting. Returns 0 on success."""
    cdef int i, j, k, piv
    cdef double best, tmp, factor
    for k in range(m):
        piv = k
        best = fabs(a[k * m + k])
        for i in range(k + 1, m):
            if fabs(a[i * m + k]) > best:
                best = fabs(a[i * m + k])
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(m):
                tmp = a[k * m + j]
                a[k * m + j] = a[piv * m + j]
                a[piv * m + j] = tmp
                tmp = b[k * m + j]
                b[k * m + j] = b[piv * m + j]
                b[piv * m + j] = tmp
        for i in range(k + 1, m):
            factor = a[i * m + k] / a[k * m + k]
            if factor != 0.0:
                for j in range(k, m):
                    a[i * m + j] -= factor * a[k * m + j]
                for j in range(m):
                    b[i * m + j] -= factor * b[k * m + j]
    for k in range(m - 1, -1, -1):
        for j in range(m):
            tmp = b[k * m + j]
            for i in range(k + 1, m):
                tmp -= a[k * m + i] * b[i * m + j]
            b[k * m + j] = tmp / a[k * m + k]
    return 0

cdef int _expm(const double* a_in, double* out, int m, double* work) noexcept nogil:
    """out = expm(a_in). work must hold 6*m*m doubles. Returns 0 on success."""
    cdef double* a = work
    cdef double* a2 = work + m * m
    cdef double* a4 = work + 2 * m * m
    cdef double* a6 = work + 3 * m * m
    cdef double* u = work + 4 * m * m
    cdef double* v = work + 5 * m * m
    cdef int i, j, s, q
    cdef double nrm, colsum, scale

    memcpy(a, a_in, m * m * sizeof(double))

    # 1-norm (max column abs sum) decides the scaling power.
    nrm = 0.0
    for j in range(m):
        colsum = 0.0
        for i in range(m):
            colsum += fabs(a[i * m + j])
        if colsum > nrm:
            nrm = colsum
    s = 0
    if nrm > THETA7:
        s = <int>ceil(log2(nrm / THETA7))
        if s < 0:
            s = 0
        scale = 1.0
        for i in range(s):
            scale *= 0.5
        for i in range(m * m):
            a[i] *= scale

    _matmul(a, a, a2, m)
    _matmul(a2, a2, a4, m)
    _matmul(a4, a2, a6, m)

    # u <- A @ (B7*A6 + B5*A4 + B3*A2 + B1*I); v <- B6*A6 + B4*A4 + B2*A2 + B0*I
    for i in range(m * m):
        v[i] = B7 * a6[i] + B5 * a4[i] + B3 * a2[i]
    for i in range(m):
        v[i * m + i] += B1
    _matmul(a, v, u, m)
    for i in range(m * m):
        v[i] = B6 * a6[i] + B4 * a4[i] + B2 * a2[i]
    for i in range(m):
        v[i * m + i] += B0

    # a <- V - U (reuse), out <- V + U, then solve.
    for i in range(m * m):
        a[i] = v[i] - u[i]
        out[i] = v[i] + u[i]
    if _solve(a, out, m) != 0:
        return -1

    for q in range(s):
        memcpy(a, out, m * m * sizeof(double))
        _matmul(a, a, out, m)
    return 0


def expm(a):
    """Matrix exponential of a single square matrix."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] arr = np.ascontiguousarray(a, dtype=np.float64)
    cdef int m = arr.shape[0]
    if arr.shape[1] != m:
        raise ValueError("expm expects a square matrix")
    if m > MAXDIM:
        import scipy.linalg
        return scipy.linalg.expm(np.asarray(a, dtype=float))
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = np.empty((m, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] work = np.empty(6 * m * m)
    if _expm(&arr[0, 0], &out[0, 0], m, &work[0]) != 0:
        raise np.linalg.LinAlgError("Pade denominator is singular")
    return out


def propagate(gens, dts):
    """Compose per-step exponentials of generator matrices.

    ``psi_0 = I`` and ``psi_{k+1} = expm(dts[k] * gens[k]) @ psi_k``; returns
    the (N+1, m, m) stack of cumulative products.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] g = np.ascontiguousarray(gens, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] h = np.ascontiguousarray(dts, dtype=np.float64)
    cdef int n_steps = g.shape[0]
    cdef int m = g.shape[1]
    if g.shape[2] != m:
        raise ValueError("generator stack must be (N, m, m)")
    if h.shape[0] != n_steps:
        raise ValueError("dts length must match the generator stack")
    if m > MAXDIM:
        from . import fallback
        return fallback.propagate(gens, dts)

    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] out = np.empty((n_steps + 1, m, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] work = np.empty((7 * m * m) + m * m)
    cdef double* step = &work[6 * m * m]
    cdef double* scaled = &work[7 * m * m]
    cdef int k, i, status = 0
    with nogil:
        memset(&out[0, 0, 0], 0, m * m * sizeof(double))
        for i in range(m):
            out[0, i, i] = 1.0
        for k in range(n_steps):
            for i in range(m * m):
                scaled[i] = h[k] * (&g[k, 0, 0])[i]
            if _expm(scaled, step, m, &work[0]) != 0:
                status = -1
                break
            _matmul(step, &out[k, 0, 0], &out[k + 1, 0, 0], m)
    if status != 0:
        raise np.linalg.LinAlgError("Pade denominator is singular")
    return out
