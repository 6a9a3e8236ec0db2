"""Decision statistics computed at the fusion center.

Two detectors are implemented. The covariance-ratio detector estimates the
leading Toeplitz lag coefficients of the uncompressed covariance from the
compressed sample covariance by least squares and forms the ratio of total
absolute covariance mass to diagonal mass; it needs no noise-power knowledge
to set its threshold. The energy detector sums received power and uses a
closed-form Gaussian-approximation threshold that scales with the assumed
noise power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels, linalg
from .compression import ProjectionMatrix, SampleBatch
from .errors import ConfigInvalid, DegenerateStatistic, DomainError, ShapeMismatch

COVARIANCE_RATIO = "covariance"
ENERGY = "energy"

_SQRT2 = math.sqrt(2.0)
_SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DetectorOutput:
    """A decision statistic value tagged with the detector that produced it."""

    statistic: float
    kind: str


@dataclass(eq=False)
class LagBasis:
    """Compressed images of the first K Toeplitz lag-indicator matrices.

    ``matrices[k]`` is A @ T_k @ A.T for the symmetric lag-k indicator T_k,
    so any K-banded symmetric Toeplitz covariance maps to a linear
    combination of these under the projection. The gram matrix of the stack
    is cached because it depends only on the projection and is reused for
    every snapshot batch that shares it.
    """

    matrices: np.ndarray
    num_sensors: int

    def __post_init__(self):
        self.matrices.setflags(write=False)

    @property
    def num_lags(self) -> int:
        return self.matrices.shape[0]

    @cached_property
    def gram(self) -> np.ndarray:
        return _kernels.basis_gram(self.matrices)


@dataclass(frozen=True, eq=False)
class LagEstimate:
    """Least-squares estimate of the first K Toeplitz lag coefficients."""

    values: np.ndarray
    num_sensors: int

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size < 1 or values.size > self.num_sensors:
            raise ShapeMismatch(
                f"expected between 1 and {self.num_sensors} lag values, "
                f"got shape {values.shape}"
            )

    @property
    def num_lags(self) -> int:
        return self.values.size


def sample_covariance(batch: SampleBatch) -> np.ndarray:
    """Second-moment sample covariance (1/T) Y @ Y.T, without mean removal.

    The observation model is zero-mean, so no mean is subtracted; doing so
    would change the statistic's small-T distribution.
    """
    return _kernels.sample_covariance(batch.observations)


def build_lag_basis(a: ProjectionMatrix, num_lags: int) -> LagBasis:
    """Build the compressed lag-indicator images for lags 0 .. num_lags-1."""
    if not (1 <= num_lags <= a.num_sensors):
        raise ConfigInvalid(
            "K", f"requires 1 <= K <= L, got K={num_lags}, L={a.num_sensors}"
        )
    return LagBasis(_kernels.lag_basis(a.matrix, num_lags), a.num_sensors)


def estimate_lags(sigma_y: np.ndarray, basis: LagBasis) -> LagEstimate:
    """Least-squares fit of the compressed covariance in the lag basis.

    Solves the normal equations built from trace inner products; raises
    SingularSystem (propagated) when the basis gram matrix is too
    ill-conditioned, which signals too many lags for the given projection.
    """
    sigma_y = np.ascontiguousarray(sigma_y, dtype=np.float64)
    m = basis.matrices.shape[1]
    if sigma_y.shape != (m, m):
        raise ShapeMismatch(
            f"covariance shape {sigma_y.shape} does not match basis dim {m}"
        )
    rhs = _kernels.basis_project(sigma_y, basis.matrices)
    values = linalg.solve_symmetric(basis.gram, rhs)
    return LagEstimate(values, basis.num_sensors)


def covariance_ratio_from_lags(est: LagEstimate) -> DetectorOutput:
    """Covariance-ratio statistic reconstructed from lag coefficients.

    For a banded symmetric Toeplitz matrix with first-row magnitudes
    |d_1|..|d_K|, the total absolute mass is L|d_1| + 2 sum_l (L-l)|d_{l+1}|
    and the diagonal mass is L|d_1|; the statistic is their ratio, >= 1 with
    equality for a diagonal covariance.
    """
    values = est.values.tolist()
    l = est.num_sensors
    lead = abs(values[0])
    if lead < 1e-300:
        raise DegenerateStatistic("leading lag coefficient is numerically zero")
    total = l * lead
    for lag in range(1, len(values)):
        total += 2.0 * (l - lag) * abs(values[lag])
    return DetectorOutput(total / (l * lead), COVARIANCE_RATIO)


def covariance_ratio_exact(sigma: np.ndarray) -> DetectorOutput:
    """Covariance ratio evaluated directly on a full covariance matrix.

    Sum of absolute values of all entries over the sum of absolute diagonal
    entries. This is the uncompressed-domain reference for the lag-based
    approximation; the two agree exactly on banded symmetric Toeplitz input.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {sigma.shape}")
    diagonal = float(np.abs(np.diagonal(sigma)).sum())
    if diagonal == 0.0:
        raise DegenerateStatistic("diagonal absolute sum is zero")
    return DetectorOutput(float(np.abs(sigma).sum()) / diagonal, COVARIANCE_RATIO)


def energy_statistic(batch: SampleBatch) -> DetectorOutput:
    """Total received energy: sum of squared entries of the batch."""
    y = batch.observations
    return DetectorOutput(float(np.vdot(y, y)), ENERGY)


def energy_threshold(
    noise_power: float, num_measurements: int, num_snapshots: int, alpha0: float
) -> float:
    """Energy-detector threshold for a target false-alarm rate.

    Gaussian approximation of the noise-only energy:
    tau = noise_power * (sqrt(2 M T) * q_inverse(alpha0) + M T).
    """
    if num_measurements < 1 or num_snapshots < 1:
        raise ConfigInvalid("M", "num_measurements and num_snapshots must be >= 1")
    if noise_power <= 0.0:
        raise ConfigInvalid("noise_power", f"must be > 0, got {noise_power}")
    mt = num_measurements * num_snapshots
    return noise_power * (math.sqrt(2.0 * mt) * q_inverse(alpha0) + mt)


def q_function(x: float) -> float:
    """Standard normal upper-tail probability Q(x) = P(Z >= x)."""
    return 0.5 * math.erfc(x / _SQRT2)


# Acklam's rational approximation of the standard normal quantile,
# |relative error| < 1.15e-9 over the open unit interval.
_ACKLAM_A = (
    -3.969683028665376e01,
    2.209460984245205e02,
    -2.759285104469687e02,
    1.383577518672690e02,
    -3.066479806614716e01,
    2.506628277459239e00,
)
_ACKLAM_B = (
    -5.447609879822406e01,
    1.615858368580409e02,
    -1.556989798598866e02,
    6.680131188771972e01,
    -1.328068155288572e01,
)
_ACKLAM_C = (
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e00,
    -2.549732539343734e00,
    4.374664141464968e00,
    2.938163982698783e00,
)
_ACKLAM_D = (
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e00,
    3.754408661907416e00,
)


def _acklam_lower_quantile(p: float) -> float:
    """Normal quantile for p in (0, 0.5] via Acklam's approximation."""
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    q = p - 0.5
    r = q * q
    return (
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
    ) / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def q_inverse(p: float) -> float:
    """Inverse of the Gaussian Q function: the x with Q(x) = p.

    Acklam's rational approximation refined by one Newton step against the
    erfc-based tail evaluation; absolute error below 1e-9 across
    p in [1e-12, 1 - 1e-12].
    """
    if not (0.0 < p < 1.0):
        raise DomainError(f"q_inverse requires 0 < p < 1, got {p}")
    if p > 0.5:
        # 1 - p is exact for p in [0.5, 1), so the reflection loses nothing.
        return -q_inverse(1.0 - p)
    x = -_acklam_lower_quantile(p)
    density = math.exp(-0.5 * x * x) / _SQRT_TWO_PI
    if density > 0.0:
        x += (q_function(x) - p) / density
    return x
