"""Random projection matrices and the coherent MAC channel.

Each of the M channel uses delivers one inner product of the length-L
observation vector with a row of the projection matrix A, plus receiver
noise. Two ensembles of A are supported: rows orthonormalized from iid
Gaussian draws, and iid sparse ternary entries where on average only
L / s0 sensors transmit per channel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigInvalid, RankDeficient, ShapeMismatch

ORTHONORMAL_ROWS = "orthonormal"
SPARSE_TERNARY = "sparse"

# Rows whose post-projection norm collapses below this ratio are treated as
# linearly dependent; continuous Gaussian draws hit this with probability ~0.
_DEPENDENT_ROW_RATIO = 1e-8
_MAX_REDRAWS = 3


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """An M x L projection with its ensemble tag.

    ``s0`` is meaningful only for the sparse-ternary kind, where entries are
    drawn from {+sqrt(s0/L), 0, -sqrt(s0/L)} with zero probability 1 - 1/s0.
    """

    matrix: np.ndarray
    kind: str
    s0: float | None = None

    def __post_init__(self):
        mat = np.ascontiguousarray(self.matrix, dtype=np.float64)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        if mat.ndim != 2:
            raise ShapeMismatch(f"projection must be 2-D, got shape {mat.shape}")
        m, l = mat.shape
        if not (1 <= m <= l):
            raise ConfigInvalid("M", f"requires 1 <= M <= L, got M={m}, L={l}")
        if self.kind not in (ORTHONORMAL_ROWS, SPARSE_TERNARY):
            raise ConfigInvalid("projection_kind", f"unknown kind {self.kind!r}")

    @property
    def num_measurements(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_sensors(self) -> int:
        return self.matrix.shape[1]

    @property
    def compression_ratio(self) -> float:
        return self.num_measurements / self.num_sensors


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Compressed observations: one length-M vector per snapshot."""

    observations: np.ndarray
    projection: ProjectionMatrix
    fusion_noise_variance: float

    def __post_init__(self):
        obs = np.ascontiguousarray(self.observations, dtype=np.float64)
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        if obs.ndim != 2 or obs.shape[0] != self.projection.num_measurements:
            raise ShapeMismatch(
                f"observations shape {obs.shape} does not match "
                f"M={self.projection.num_measurements}"
            )

    @property
    def num_snapshots(self) -> int:
        return self.observations.shape[1]


def gen_orthonormal(m: int, l: int, rng: np.random.Generator) -> ProjectionMatrix:
    """Draw M iid standard Gaussian rows and orthonormalize them.

    Twice-applied Gram-Schmidt keeps A @ A.T within 1e-10 of the identity.
    Dependent draws are redrawn up to three times before RankDeficient is
    raised (practically unreachable for continuous draws).
    """
    if not (1 <= m <= l):
        raise ConfigInvalid("M", f"requires 1 <= M <= L, got M={m}, L={l}")
    for _ in range(_MAX_REDRAWS):
        g = rng.standard_normal((m, l))
        q, min_ratio = _kernels.orthonormalize_rows(g)
        if min_ratio > _DEPENDENT_ROW_RATIO:
            return ProjectionMatrix(q, ORTHONORMAL_ROWS)
    raise RankDeficient(
        f"failed to draw {m} independent rows of length {l} in {_MAX_REDRAWS} attempts"
    )


def gen_sparse(m: int, l: int, s0: float, rng: np.random.Generator) -> ProjectionMatrix:
    """Sparse ternary projection: +/-sqrt(s0/L) each w.p. 1/(2 s0), else 0."""
    if not (1 <= m <= l):
        raise ConfigInvalid("M", f"requires 1 <= M <= L, got M={m}, L={l}")
    if not (s0 >= 1.0 and math.isfinite(s0)):
        raise ConfigInvalid("s0", f"requires s0 >= 1, got {s0}")
    scale = math.sqrt(s0 / l)
    u = rng.random((m, l))
    mat = np.where(u < 0.5 / s0, scale, np.where(u < 1.0 / s0, -scale, 0.0))
    return ProjectionMatrix(mat, SPARSE_TERNARY, s0=s0)


def mac_transmit(
    a: ProjectionMatrix,
    x: np.ndarray,
    fusion_noise_variance: float,
    rng: np.random.Generator,
) -> SampleBatch:
    """Push raw observations through the MAC: Y = A @ X plus receiver noise."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != a.num_sensors:
        raise ShapeMismatch(
            f"raw observations shape {x.shape} does not match L={a.num_sensors}"
        )
    if fusion_noise_variance < 0.0:
        raise ConfigInvalid("sigma_w2", f"must be >= 0, got {fusion_noise_variance}")
    y = a.matrix @ x
    if fusion_noise_variance > 0.0:
        y += math.sqrt(fusion_noise_variance) * rng.standard_normal(y.shape)
    return SampleBatch(y, a, fusion_noise_variance)
