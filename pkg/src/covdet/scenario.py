"""Sensor-field scenario: geometry, correlation model, and raw observations.

The scenario is an equally spaced 1-D array of ``L`` sensors watching a
zero-mean random source. Spatial correlation between sensors decays
geometrically with separation, so the signal covariance is symmetric
Toeplitz and fully described by its first row. Observations are sampled
per time snapshot, independently across snapshots.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigInvalid

GAUSSIAN = "gaussian"
UNIFORM = "uniform"

# Half-width of a zero-mean unit-variance uniform distribution.
_UNIFORM_HALF_WIDTH = math.sqrt(3.0)


class Hypothesis(enum.Enum):
    """Signal absent (H0) or present (H1)."""

    H0 = 0
    H1 = 1


@dataclass(frozen=True)
class PowerExponential:
    """Correlation exp(-distance / theta1) between sensors."""

    theta1: float

    def __post_init__(self):
        if not (self.theta1 > 0.0 and math.isfinite(self.theta1)):
            raise ConfigInvalid("theta1", f"must be finite and > 0, got {self.theta1}")


@dataclass(frozen=True)
class DirectRho:
    """Adjacent-sensor correlation given directly as rho in (-1, 1)."""

    rho: float

    def __post_init__(self):
        if not (abs(self.rho) < 1.0 and math.isfinite(self.rho)):
            raise ConfigInvalid("rho", f"must satisfy |rho| < 1, got {self.rho}")


CorrelationModel = PowerExponential | DirectRho


@dataclass(frozen=True)
class ScenarioConfig:
    """Static description of the sensor field and its noise powers.

    ``source`` selects the marginal law of the random source: "gaussian"
    (default) or "uniform" with matching covariance, the latter existing to
    exercise detectors that claim not to depend on Gaussianity.
    """

    num_sensors: int
    correlation: CorrelationModel
    sigma_s2: float
    sigma_v2: float
    sigma_w2: float
    inter_sensor_distance: float = 1.0
    source: str = GAUSSIAN

    def __post_init__(self):
        if self.num_sensors < 2:
            raise ConfigInvalid("num_sensors", f"requires >= 2, got {self.num_sensors}")
        for key in ("sigma_s2", "sigma_v2", "sigma_w2"):
            value = getattr(self, key)
            if not (value > 0.0 and math.isfinite(value)):
                raise ConfigInvalid(key, f"must be finite and > 0, got {value}")
        if not (self.inter_sensor_distance > 0.0):
            raise ConfigInvalid(
                "inter_sensor_distance",
                f"must be > 0, got {self.inter_sensor_distance}",
            )
        if self.source not in (GAUSSIAN, UNIFORM):
            raise ConfigInvalid("source", f"unknown source {self.source!r}")

    @property
    def noise_power(self) -> float:
        """Total effective noise power: sensor noise plus fusion noise."""
        return self.sigma_v2 + self.sigma_w2

    @property
    def rho(self) -> float:
        """Adjacent-sensor correlation coefficient implied by the model."""
        if isinstance(self.correlation, DirectRho):
            return self.correlation.rho
        return math.exp(-self.inter_sensor_distance / self.correlation.theta1)


@dataclass(frozen=True, eq=False)
class ToeplitzCovariance:
    """Symmetric Toeplitz matrix stored as its first row."""

    first_row: np.ndarray

    def __post_init__(self):
        row = np.array(self.first_row, dtype=np.float64, copy=True)
        row.setflags(write=False)
        object.__setattr__(self, "first_row", row)
        if row.ndim != 1 or row.size < 1:
            raise ConfigInvalid("first_row", "must be a non-empty vector")
        if not np.all(np.isfinite(row)):
            raise ConfigInvalid("first_row", "entries must be finite")
        if not (row[0] > 0.0):
            raise ConfigInvalid("first_row", f"leading entry must be > 0, got {row[0]}")
        if np.any(np.abs(row[1:]) > row[0]):
            raise ConfigInvalid("first_row", "off-diagonal lags must not exceed the diagonal")

    @property
    def dim(self) -> int:
        return self.first_row.size

    def full(self) -> np.ndarray:
        """Materialize the dense L x L matrix."""
        idx = np.arange(self.dim)
        return self.first_row[np.abs(idx[:, None] - idx[None, :])]


def signal_covariance(cfg: ScenarioConfig) -> ToeplitzCovariance:
    """First row of the source covariance: sigma_s2 * rho**k at lag k."""
    # Integer lags keep negative rho exact; float exponents would NaN out.
    lags = np.arange(cfg.num_sensors)
    row = cfg.sigma_s2 * cfg.rho ** lags
    return ToeplitzCovariance(row)


def noisy_signal_covariance(cfg: ScenarioConfig) -> ToeplitzCovariance:
    """Signal covariance with the total noise power added on the diagonal."""
    row = signal_covariance(cfg).first_row.copy()
    row[0] += cfg.noise_power
    return ToeplitzCovariance(row)


def snr_db(cfg: ScenarioConfig) -> float:
    """Average SNR in dB: 10 log10(sigma_s2 / (sigma_v2 + sigma_w2))."""
    return 10.0 * math.log10(cfg.sigma_s2 / cfg.noise_power)


def sample_raw(
    cfg: ScenarioConfig,
    hyp: Hypothesis,
    num_snapshots: int,
    rng: np.random.Generator,
    *,
    signal_factor: np.ndarray | None = None,
) -> np.ndarray:
    """Draw the L x T matrix of raw sensor observations.

    Columns are independent snapshots. Under H1 each snapshot is a colored
    source draw plus white sensor noise; under H0 it is sensor noise only.
    ``signal_factor`` optionally supplies a precomputed Cholesky factor of
    the signal covariance so hot loops can amortize the factorization; it
    must equal ``linalg.cholesky(signal_covariance(cfg).full())``.
    """
    if num_snapshots < 1:
        raise ConfigInvalid("num_snapshots", f"requires >= 1, got {num_snapshots}")
    l = cfg.num_sensors
    sigma_v = math.sqrt(cfg.sigma_v2)
    if hyp is Hypothesis.H0:
        return sigma_v * rng.standard_normal((l, num_snapshots))
    if signal_factor is None:
        signal_factor = linalg.cholesky(signal_covariance(cfg).full())
    if cfg.source == GAUSSIAN:
        base = rng.standard_normal((l, num_snapshots))
    else:
        base = rng.uniform(-_UNIFORM_HALF_WIDTH, _UNIFORM_HALF_WIDTH, (l, num_snapshots))
    noise = sigma_v * rng.standard_normal((l, num_snapshots))
    return signal_factor @ base + noise
