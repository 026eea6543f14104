# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: sums of unitary conjugations and their superoperators."""

import numpy as np

ctypedef double complex cplx


def conj_sum(unitaries, x):
    """Return ``sum_i U_i x U_i^dagger`` for a stack ``unitaries`` of shape (m, n, n)."""
    cdef const cplx[:, :, ::1] u = np.ascontiguousarray(unitaries, dtype=np.complex128)
    cdef const cplx[:, ::1] xv = np.ascontiguousarray(x, dtype=np.complex128)
    cdef Py_ssize_t m = u.shape[0], n = u.shape[1]
    if xv.shape[0] != n or xv.shape[1] != n or u.shape[2] != n:
        raise ValueError("shape mismatch between unitaries and x")
    out = np.zeros((n, n), dtype=np.complex128)
    tmp = np.empty((n, n), dtype=np.complex128)
    cdef cplx[:, ::1] o = out
    cdef cplx[:, ::1] t = tmp
    cdef Py_ssize_t a, i, j, k
    cdef cplx s
    with nogil:
        for a in range(m):
            # t = U x
            for i in range(n):
                for j in range(n):
                    s = 0
                    for k in range(n):
                        s = s + u[a, i, k] * xv[k, j]
                    t[i, j] = s
            # o += t U^dagger
            for i in range(n):
                for j in range(n):
                    s = 0
                    for k in range(n):
                        s = s + t[i, k] * u[a, j, k].conjugate()
                    o[i, j] = o[i, j] + s
    return out


def adjoint_sum(unitaries):
    """Return ``sum_i U_i ⊗ conj(U_i)``, the superoperator of ``conj_sum`` on row-major vec."""
    cdef const cplx[:, :, ::1] u = np.ascontiguousarray(unitaries, dtype=np.complex128)
    cdef Py_ssize_t m = u.shape[0], n = u.shape[1]
    out = np.zeros((n * n, n * n), dtype=np.complex128)
    cdef cplx[:, ::1] o = out
    cdef Py_ssize_t a, i, j, k, l
    cdef cplx uik
    with nogil:
        for a in range(m):
            for i in range(n):
                for k in range(n):
                    uik = u[a, i, k]
                    for j in range(n):
                        for l in range(n):
                            o[i * n + j, k * n + l] = o[i * n + j, k * n + l] + uik * u[a, j, l].conjugate()
    return out
