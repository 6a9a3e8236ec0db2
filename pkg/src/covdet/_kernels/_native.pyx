# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Cython implementations of the numeric kernels.

Same contracts as covdet._kernels.reference; see that module for docs.
The GEMM-shaped pieces call BLAS directly (no Python-call overhead, and
competitive at every size); the Gram-Schmidt sweep stays as plain C loops,
which beat BLAS at these row counts. Symmetric outputs are exactly
symmetric by construction.
"""

from libc.math cimport sqrt, INFINITY

import numpy as np

from scipy.linalg.cython_blas cimport ddot, dgemm, dgemv, dsyrk


cdef void _mirror_f_lower(double[:, ::1] c) noexcept nogil:
    # BLAS fills the Fortran lower triangle == C-order upper; mirror it.
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(i + 1, n):
            c[j, i] = c[i, j]


def sample_covariance(const double[:, ::1] y):
    cdef int m = <int> y.shape[0]
    cdef int t = <int> y.shape[1]
    out = np.empty((m, m))
    cdef double[:, ::1] c = out
    cdef double alpha = 1.0 / t
    cdef double beta = 0.0
    cdef char uplo = b'L'
    cdef char trans = b'T'
    # Row-major Y (M x T) is Fortran (T x M): Y @ Y.T == (Y_F)^T @ Y_F.
    dsyrk(&uplo, &trans, &m, &t, &alpha,
          <double*> &y[0, 0], &t, &beta, &c[0, 0], &m)
    _mirror_f_lower(c)
    return out


def lag_basis(const double[:, ::1] a, Py_ssize_t num_lags):
    cdef int m = <int> a.shape[0]
    cdef int l = <int> a.shape[1]
    out = np.empty((num_lags, m, m))
    cdef double[:, :, ::1] b = out
    scratch = np.empty((m, m))
    cdef double[:, ::1] tmp = scratch
    cdef double alpha = 1.0
    cdef double beta = 0.0
    cdef char uplo = b'L'
    cdef char trans_t = b'T'
    cdef char trans_n = b'N'
    cdef int k, inner
    cdef Py_ssize_t p, q
    cdef double[:, ::1] b0 = b[0]
    dsyrk(&uplo, &trans_t, &m, &l, &alpha,
          <double*> &a[0, 0], &l, &beta, &b0[0, 0], &m)
    _mirror_f_lower(b0)
    for k in range(1, <int> num_lags):
        inner = l - k
        # Fortran view of A[:, :l-k] is its transpose with lda = l, likewise
        # for A[:, k:] starting at element k; their product is the one-sided
        # lag sum, symmetrized below.
        dgemm(&trans_t, &trans_n, &m, &m, &inner, &alpha,
              <double*> &a[0, 0], &l, <double*> &a[0, k], &l,
              &beta, &tmp[0, 0], &m)
        for p in range(m):
            for q in range(p, m):
                b[k, p, q] = tmp[p, q] + tmp[q, p]
                b[k, q, p] = b[k, p, q]
    return out


def basis_gram(const double[:, :, ::1] b):
    cdef int num = <int> b.shape[0]
    cdef int mm = <int> (b.shape[1] * b.shape[2])
    out = np.empty((num, num))
    cdef double[:, ::1] g = out
    cdef double alpha = 1.0
    cdef double beta = 0.0
    cdef char uplo = b'L'
    cdef char trans = b'T'
    dsyrk(&uplo, &trans, &num, &mm, &alpha,
          <double*> &b[0, 0, 0], &mm, &beta, &g[0, 0], &num)
    _mirror_f_lower(g)
    return out


def basis_project(const double[:, ::1] s, const double[:, :, ::1] b):
    cdef int num = <int> b.shape[0]
    cdef int mm = <int> (b.shape[1] * b.shape[2])
    out = np.empty(num)
    cdef double[::1] f = out
    cdef double alpha = 1.0
    cdef double beta = 0.0
    cdef char trans = b'T'
    cdef int one = 1
    dgemv(&trans, &mm, &num, &alpha, <double*> &b[0, 0, 0], &mm,
          <double*> &s[0, 0], &one, &beta, &f[0], &one)
    return out


def trace_product(const double[:, ::1] p, const double[:, ::1] q):
    cdef int n = <int> (p.shape[0] * p.shape[1])
    cdef int one = 1
    return ddot(&n, <double*> &p[0, 0], &one, <double*> &q[0, 0], &one)


def orthonormalize_rows(const double[:, ::1] g):
    cdef Py_ssize_t m = g.shape[0]
    cdef Py_ssize_t l = g.shape[1]
    out = np.array(g, dtype=np.float64, copy=True)
    cdef double[:, ::1] q = out
    coef_arr = np.empty(m)
    cdef double[::1] coef = coef_arr
    cdef Py_ssize_t i, r, c, rep
    cdef double norm0, norm1, acc, d
    cdef double min_ratio = INFINITY
    for i in range(m):
        acc = 0.0
        for c in range(l):
            acc += q[i, c] * q[i, c]
        norm0 = sqrt(acc)
        if norm0 == 0.0:
            return out, 0.0
        for rep in range(2):
            if i == 0:
                break
            for r in range(i):
                acc = 0.0
                for c in range(l):
                    acc += q[r, c] * q[i, c]
                coef[r] = acc
            for r in range(i):
                d = coef[r]
                for c in range(l):
                    q[i, c] -= d * q[r, c]
        acc = 0.0
        for c in range(l):
            acc += q[i, c] * q[i, c]
        norm1 = sqrt(acc)
        if norm1 / norm0 < min_ratio:
            min_ratio = norm1 / norm0
        if norm1 == 0.0:
            return out, 0.0
        for c in range(l):
            q[i, c] /= norm1
    return out, min_ratio
