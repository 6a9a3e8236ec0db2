"""Dense symmetric linear algebra used by the rest of the package.

Covariance matrices here are small (tens of rows), so everything is plain
row-major float64 with LAPACK doing the factorizations. The two policies
that matter live here:

* Cholesky gets one jitter retry. Correlation matrices close to the unit-
  correlation limit can fail factorization by rounding alone; adding
  ``1e-12 * trace / dim`` to the diagonal once rescues those without hiding
  genuinely indefinite inputs.
* Symmetric solves refuse ill-conditioned systems. A normal-equations matrix
  whose unjittered factorization fails, or whose Cholesky diagonal spans a
  squared ratio above 1e12, is reported as singular rather than solved.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve

from . import _kernels
from .errors import NotPositiveDefinite, ShapeMismatch, SingularSystem

JITTER_SCALE = 1e-12
CONDITION_LIMIT = 1e12


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return a copy of ``m`` with the upper triangle mirrored onto the lower."""
    out = np.array(m, dtype=np.float64)
    i, j = np.triu_indices(out.shape[0], k=1)
    out[j, i] = out[i, j]
    return out


def _require_square(s: np.ndarray, name: str) -> np.ndarray:
    s = np.ascontiguousarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
        raise ShapeMismatch(f"{name} must be a square matrix, got shape {s.shape}")
    return s


def _cholesky_attempts(s: np.ndarray):
    """Yield (factor, used_jitter) for the raw and once-jittered matrix."""
    try:
        yield np.linalg.cholesky(s), False
        return
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_SCALE * float(np.trace(s)) / s.shape[0]
    try:
        yield np.linalg.cholesky(s + jitter * np.eye(s.shape[0])), True
    except np.linalg.LinAlgError:
        return


def cholesky(s: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == s, with one jitter retry.

    Raises NotPositiveDefinite when the matrix fails to factor even after
    the jittered attempt.
    """
    s = _require_square(s, "s")
    for factor, _ in _cholesky_attempts(s):
        return factor
    raise NotPositiveDefinite(
        f"matrix of dim {s.shape[0]} is not positive definite (jitter retry failed)"
    )


def trace_product(p: np.ndarray, q: np.ndarray) -> float:
    """Elementwise product sum of two same-shape matrices, equal to tr(P @ Q.T)."""
    p = np.ascontiguousarray(p, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeMismatch(f"trace_product shapes differ: {p.shape} vs {q.shape}")
    return _kernels.trace_product(p, q)


def solve_symmetric(h: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Solve h @ d = f for symmetric positive definite ``h``.

    Raises SingularSystem when ``h`` does not factor without jitter (a zero
    or negative pivot means its condition is past rescue) or when the
    factor's extreme diagonal entries put the squared ratio above
    CONDITION_LIMIT.
    """
    h = _require_square(h, "h")
    f = np.ascontiguousarray(f, dtype=np.float64)
    if f.shape != (h.shape[0],):
        raise ShapeMismatch(
            f"right-hand side length {f.shape} does not match matrix dim {h.shape[0]}"
        )
    try:
        factor = np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        raise SingularSystem(
            f"symmetric system of dim {h.shape[0]} has a non-positive pivot"
        ) from None
    diag = np.diagonal(factor)
    condition = (float(diag.max()) / float(diag.min())) ** 2
    if condition > CONDITION_LIMIT:
        raise SingularSystem(
            f"condition estimate {condition:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )
    return cho_solve((factor, True), f)
