# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: complex Jacobi eigensolver and HKM Schur assembly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs
cdef extern from "complex.h" nogil:
    double cabs(double complex)
    double complex conj(double complex)
    double creal(double complex)

cnp.import_array()


def jacobi_eigh(a, int max_sweeps=100):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] arr = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t n = arr.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] vec = np.eye(n, dtype=np.complex128)
    cdef double complex[:, ::1] A = arr
    cdef double complex[:, ::1] V = vec
    cdef Py_ssize_t p, q, k
    cdef double frob = 0.0, off, g, theta, t, c, s, skip
    cdef double complex u, uc, xp, xq
    cdef int sweeps = 0, sweep

    for p in range(n):
        for q in range(n):
            frob += cabs(A[p, q]) ** 2
    frob = sqrt(frob)
    if n < 2 or frob == 0.0:
        return np.real(np.diag(arr)).copy(), vec, 0
    skip = 1e-18 * frob

    with nogil:
        for sweep in range(1, max_sweeps + 1):
            off = 0.0
            for p in range(n - 1):
                for q in range(p + 1, n):
                    off += 2.0 * cabs(A[p, q]) ** 2
            if sqrt(off) <= 1e-15 * frob:
                break
            sweeps = sweep
            for p in range(n - 1):
                for q in range(p + 1, n):
                    g = cabs(A[p, q])
                    if g <= skip:
                        A[p, q] = 0.0
                        A[q, p] = 0.0
                        continue
                    u = A[p, q] / g
                    uc = conj(u)
                    theta = (creal(A[q, q]) - creal(A[p, p])) / (2.0 * g)
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        xp = A[k, p]
                        xq = A[k, q]
                        A[k, p] = c * xp - s * uc * xq
                        A[k, q] = s * xp + c * uc * xq
                    for k in range(n):
                        xp = A[p, k]
                        xq = A[q, k]
                        A[p, k] = c * xp - s * u * xq
                        A[q, k] = s * xp + c * u * xq
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    A[p, p] = creal(A[p, p])
                    A[q, q] = creal(A[q, q])
                    for k in range(n):
                        xp = V[k, p]
                        xq = V[k, q]
                        V[k, p] = c * xp - s * uc * xq
                        V[k, q] = s * xp + c * uc * xq
    return np.real(np.diag(arr)).copy(), vec, sweeps


def schur_complement(ptr, rows, cols, vals, x, sinv):
    cdef int[::1] P = np.ascontiguousarray(ptr, dtype=np.intc)
    cdef int[::1] R = np.ascontiguousarray(rows, dtype=np.intc)
    cdef int[::1] C = np.ascontiguousarray(cols, dtype=np.intc)
    cdef double[::1] W = np.ascontiguousarray(vals, dtype=np.float64)
    cdef double[:, ::1] X = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] S = np.ascontiguousarray(sinv, dtype=np.float64)
    cdef Py_ssize_t m = P.shape[0] - 1
    out = np.zeros((m, m))
    cdef double[:, ::1] M = out
    cdef Py_ssize_t i, j, e, f
    cdef int re, ce
    cdef double ve, acc
    with nogil:
        for i in range(m):
            for e in range(P[i], P[i + 1]):
                ve = W[e]
                re = R[e]
                ce = C[e]
                for j in range(m):
                    acc = 0.0
                    for f in range(P[j], P[j + 1]):
                        acc = acc + W[f] * X[ce, R[f]] * S[C[f], re]
                    M[i, j] += ve * acc
    return out
