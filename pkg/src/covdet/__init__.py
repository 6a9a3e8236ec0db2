"""covdet: Monte Carlo study of nonparametric random-event detection from
MAC-compressed sensor-network data.

A 1-D field of correlated sensors is compressed through a multiple access
channel; the fusion center reconstructs the leading Toeplitz lags of the
uncompressed covariance by least squares and tests the covariance-ratio
statistic against a numerically calibrated threshold. An energy detector
with optional noise-power uncertainty serves as the baseline.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .compression import (
    ORTHONORMAL_ROWS,
    SPARSE_TERNARY,
    ProjectionMatrix,
    SampleBatch,
    gen_orthonormal,
    gen_sparse,
    mac_transmit,
)
from .detector import (
    COVARIANCE_RATIO,
    ENERGY,
    DetectorOutput,
    LagBasis,
    LagEstimate,
    build_lag_basis,
    covariance_ratio_exact,
    covariance_ratio_from_lags,
    energy_statistic,
    energy_threshold,
    estimate_lags,
    q_function,
    q_inverse,
    sample_covariance,
)
from .errors import (
    ConfigInvalid,
    CovdetError,
    DegenerateStatistic,
    DomainError,
    InsufficientTrials,
    NotPositiveDefinite,
    RankDeficient,
    ShapeMismatch,
    SingularSystem,
)
from .experiment import (
    ENERGY_UNCERTAIN,
    ExperimentPlan,
    MonteCarloResult,
    ProjectionSpec,
    RocCurve,
    SnrSweepPoint,
    SparsitySweepPoint,
    StatisticPopulations,
    apply_noise_uncertainty,
    calibrate_threshold,
    estimate_rates,
    evaluate_detectors,
    rank_auc,
    roc_curve,
    statistic_populations,
    sweep_snr,
    sweep_sparsity,
)
from .scenario import (
    GAUSSIAN,
    UNIFORM,
    CorrelationModel,
    DirectRho,
    Hypothesis,
    PowerExponential,
    ScenarioConfig,
    ToeplitzCovariance,
    noisy_signal_covariance,
    sample_raw,
    signal_covariance,
    snr_db,
)
