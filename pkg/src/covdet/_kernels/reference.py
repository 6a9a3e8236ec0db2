"""NumPy implementations of the numeric kernels.

This is the fallback backend; ``covdet._kernels._native`` provides the same
functions compiled from Cython. All functions take C-contiguous float64
arrays and return freshly allocated outputs. Symmetric results are made
exactly symmetric (the upper triangle is copied onto the lower one) so that
downstream code can rely on bitwise ``S[i, j] == S[j, i]``.
"""

from __future__ import annotations

import numpy as np


def _mirror_upper(c: np.ndarray) -> np.ndarray:
    """Copy the strict upper triangle of ``c`` onto the lower, in place."""
    i, j = np.triu_indices(c.shape[0], k=1)
    c[j, i] = c[i, j]
    return c


def sample_covariance(y: np.ndarray) -> np.ndarray:
    """Second-moment estimate (1/T) * Y @ Y.T of the columns of ``y``."""
    t = y.shape[1]
    c = y @ y.T
    c *= 1.0 / t
    return _mirror_upper(c)


def lag_basis(a: np.ndarray, num_lags: int) -> np.ndarray:
    """Compressed images of the Toeplitz lag-indicator matrices.

    For an M x L matrix ``a`` with columns a_1..a_L, entry ``k`` of the
    returned (num_lags, M, M) stack is ``a @ T_k @ a.T`` where T_k is the
    symmetric 0/1 indicator of the lag-k diagonals: T_0 = I and, for k >= 1,
    T_k marks the pairs (i, i+k) and (i+k, i).
    """
    m, l = a.shape
    b = np.empty((num_lags, m, m))
    b[0] = _mirror_upper(a @ a.T)
    for k in range(1, num_lags):
        c = a[:, : l - k] @ a[:, k:].T
        b[k] = c + c.T
    return b


def basis_gram(b: np.ndarray) -> np.ndarray:
    """Gram matrix of a stack of matrices under the trace inner product."""
    flat = b.reshape(b.shape[0], -1)
    return _mirror_upper(flat @ flat.T)


def basis_project(s: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Trace inner products of ``s`` against every matrix in the stack ``b``."""
    return b.reshape(b.shape[0], -1) @ s.reshape(-1)


def trace_product(p: np.ndarray, q: np.ndarray) -> float:
    """Sum over a, b of P[a, b] * Q[a, b], i.e. tr(P @ Q.T)."""
    return float(np.dot(p.reshape(-1), q.reshape(-1)))


def orthonormalize_rows(g: np.ndarray) -> tuple[np.ndarray, float]:
    """Orthonormalize the rows of ``g`` by twice-applied Gram-Schmidt.

    Returns ``(q, min_ratio)`` where ``min_ratio`` is the smallest ratio of
    a row's post-projection norm to its original norm. A tiny ratio means the
    rows were (numerically) linearly dependent and ``q`` should be discarded.
    The map is odd: ``orthonormalize_rows(-g)`` yields ``-q`` exactly.
    """
    q = np.array(g, dtype=np.float64, copy=True)
    m = q.shape[0]
    min_ratio = np.inf
    for i in range(m):
        norm0 = float(np.linalg.norm(q[i]))
        if norm0 == 0.0:
            return q, 0.0
        if i:
            for _ in range(2):
                q[i] -= q[:i].T @ (q[:i] @ q[i])
        norm1 = float(np.linalg.norm(q[i]))
        min_ratio = min(min_ratio, norm1 / norm0)
        if norm1 == 0.0:
            return q, 0.0
        q[i] /= norm1
    return q, min_ratio
