"""Numeric kernel backend selection.

The hot per-trial math (sample covariance, lag-basis construction, gram and
projection sums, row orthonormalization) lives behind this package. The
compiled Cython backend is preferred when the extension built; the NumPy
reference backend is the fallback. Selection happens once at import.

Set ``COVDET_BACKEND=pure`` to force the NumPy backend, ``native`` to require
the compiled one (raising if unavailable), or leave unset/``auto`` for the
default preference order. ``BACKEND`` records which one is active.
"""

from __future__ import annotations

import os

from . import reference


def _select():
    requested = os.environ.get("COVDET_BACKEND", "auto").strip().lower()
    if requested not in ("auto", "native", "pure"):
        raise ValueError(
            f"COVDET_BACKEND={requested!r} not recognized; use auto, native, or pure"
        )
    if requested == "pure":
        return reference, "pure"
    try:
        from . import _native
    except ImportError:
        if requested == "native":
            raise ImportError(
                "COVDET_BACKEND=native but the compiled extension is not available; "
                "reinstall the package with Cython and a C compiler present"
            ) from None
        return reference, "pure"
    return _native, "native"


_impl, BACKEND = _select()

sample_covariance = _impl.sample_covariance
lag_basis = _impl.lag_basis
basis_gram = _impl.basis_gram
basis_project = _impl.basis_project
trace_product = _impl.trace_product
orthonormalize_rows = _impl.orthonormalize_rows

__all__ = [
    "BACKEND",
    "basis_gram",
    "basis_project",
    "lag_basis",
    "orthonormalize_rows",
    "reference",
    "sample_covariance",
    "trace_product",
]
