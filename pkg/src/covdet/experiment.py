"""Monte Carlo engine: threshold calibration, error rates, ROC curves, sweeps.

Seeding contract
----------------
Trial ``t`` of any operation draws from a generator seeded by
``SeedSequence(entropy=plan.seed, spawn_key=stream_key + (t,))``. Stream keys
separate purposes (calibration, evaluation, ROC, per-sweep-point) so that a
threshold is never scored against the very sample that calibrated it, and so
that results are bit-identical for any number of workers and any execution
order. Within a trial the draw order is fixed: projection, H0 observations,
H0 channel noise, H1 observations, H1 channel noise, noise-uncertainty factor.

The same projection draw serves a trial's H0 and H1 runs, which pairs the two
populations and cuts Monte Carlo variance without biasing either marginal.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .compression import (
    ORTHONORMAL_ROWS,
    SPARSE_TERNARY,
    gen_orthonormal,
    gen_sparse,
    mac_transmit,
)
from .detector import (
    COVARIANCE_RATIO,
    ENERGY,
    build_lag_basis,
    covariance_ratio_from_lags,
    energy_statistic,
    energy_threshold,
    estimate_lags,
    q_inverse,
    sample_covariance,
)
from .errors import ConfigInvalid, InsufficientTrials, SingularSystem
from .scenario import Hypothesis, ScenarioConfig, sample_raw, signal_covariance, snr_db

ENERGY_UNCERTAIN = "energy_uncertain"
KNOWN_DETECTORS = (COVARIANCE_RATIO, ENERGY, ENERGY_UNCERTAIN)

# Stream-key purposes; a trial key is purpose + optional sweep indices + trial.
_STREAM_PROJECTION = 0
_STREAM_CALIBRATE = 1
_STREAM_EVALUATE = 2
_STREAM_ROC = 3

_WILSON_Z = 1.959963984540054  # q_inverse(0.025), 95% two-sided


@dataclass(frozen=True)
class ProjectionSpec:
    """How to draw the projection matrix for each trial."""

    kind: str
    num_measurements: int
    s0: float = 1.0

    def __post_init__(self):
        if self.kind not in (ORTHONORMAL_ROWS, SPARSE_TERNARY):
            raise ConfigInvalid("projection_kind", f"unknown kind {self.kind!r}")
        if self.num_measurements < 1:
            raise ConfigInvalid("M", f"requires M >= 1, got {self.num_measurements}")
        if not (self.s0 >= 1.0 and math.isfinite(self.s0)):
            raise ConfigInvalid("s0", f"requires s0 >= 1, got {self.s0}")


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything a Monte Carlo run depends on, including the master seed."""

    scenario: ScenarioConfig
    projection: ProjectionSpec
    num_snapshots: int
    trials: int
    seed: int
    num_lags: int = 3
    alpha0: float = 0.1
    beta_db: float = 0.0
    detectors: tuple[str, ...] = (COVARIANCE_RATIO, ENERGY)
    fixed_projection: bool = False

    def __post_init__(self):
        if self.num_snapshots < 1:
            raise ConfigInvalid("T", f"requires T >= 1, got {self.num_snapshots}")
        if self.trials < 1:
            raise ConfigInvalid("trials", f"requires trials >= 1, got {self.trials}")
        if not (0 <= self.seed < 2**64):
            raise ConfigInvalid("seed", "must be a 64-bit unsigned integer")
        if not (1 <= self.num_lags <= self.scenario.num_sensors):
            raise ConfigInvalid(
                "K",
                f"requires 1 <= K <= L, got K={self.num_lags}, "
                f"L={self.scenario.num_sensors}",
            )
        if not (0.0 < self.alpha0 < 1.0):
            raise ConfigInvalid("alpha0", f"requires 0 < alpha0 < 1, got {self.alpha0}")
        if not (self.beta_db >= 0.0 and math.isfinite(self.beta_db)):
            raise ConfigInvalid("beta_db", f"requires beta_db >= 0, got {self.beta_db}")
        if self.projection.num_measurements > self.scenario.num_sensors:
            raise ConfigInvalid(
                "M",
                f"requires M <= L, got M={self.projection.num_measurements}, "
                f"L={self.scenario.num_sensors}",
            )
        if not self.detectors:
            raise ConfigInvalid("detectors", "at least one detector is required")
        for name in self.detectors:
            if name not in KNOWN_DETECTORS:
                raise ConfigInvalid("detectors", f"unknown detector {name!r}")

    @property
    def compression_ratio(self) -> float:
        return self.projection.num_measurements / self.scenario.num_sensors


@dataclass(frozen=True)
class MonteCarloResult:
    """Empirical false-alarm and detection rates with 95% Wilson half-widths."""

    pf: float
    pd: float
    pf_halfwidth: float
    pd_halfwidth: float
    threshold_used: float
    trials: int


@dataclass(eq=False)
class StatisticPopulations:
    """Per-trial decision statistics under both hypotheses.

    ``assumed_noise_power`` holds the per-trial noise power a receiver with
    uncertainty ``beta_db`` would assume when setting the energy threshold;
    with ``beta_db == 0`` it equals the true power exactly.
    """

    covariance_h0: np.ndarray
    energy_h0: np.ndarray
    covariance_h1: np.ndarray | None
    energy_h1: np.ndarray | None
    assumed_noise_power: np.ndarray


@dataclass(eq=False)
class RocCurve:
    """(pf, pd) pairs swept over every distinct statistic value.

    Points are ordered by increasing threshold, so pf is non-increasing from
    the leading (1, 1) point down to the trailing (0, 0).
    """

    points: np.ndarray
    plan: ExperimentPlan
    detector: str

    def auc(self) -> float:
        pf = self.points[::-1, 0]
        pd = self.points[::-1, 1]
        return float(np.trapezoid(pd, pf))


@dataclass(frozen=True)
class SnrSweepPoint:
    gamma0_db: float
    sigma_v2: float
    results: dict[str, MonteCarloResult]


@dataclass(frozen=True)
class SparsitySweepPoint:
    """One covariance-detector rate measurement; ``s0 is None`` marks the
    orthonormal-rows reference configuration."""

    s0: float | None
    gamma0_db: float
    sigma_v2: float
    result: MonteCarloResult


def _resolve_workers(workers: int | None) -> int:
    """Explicit argument wins; otherwise COVDET_WORKERS; 0 means auto."""
    if workers is None:
        env = os.environ.get("COVDET_WORKERS", "").strip()
        if not env:
            return 1
        try:
            workers = int(env)
        except ValueError:
            raise ConfigInvalid("COVDET_WORKERS", f"not an integer: {env!r}") from None
    if workers < 0:
        raise ConfigInvalid("COVDET_WORKERS", f"must be >= 0, got {workers}")
    if workers == 0:
        workers = os.cpu_count() or 1
    return workers


def _trial_rng(seed: int, key: tuple[int, ...]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _draw_projection(spec: ProjectionSpec, num_sensors: int, rng: np.random.Generator):
    if spec.kind == ORTHONORMAL_ROWS:
        return gen_orthonormal(spec.num_measurements, num_sensors, rng)
    return gen_sparse(spec.num_measurements, num_sensors, spec.s0, rng)


# Very sparse draws can leave lag-indicator images linearly dependent (for
# instance when no occupied column pair sits at some lag); such a projection
# cannot support the least-squares fit and is redrawn. A cap keeps
# structurally impossible lag counts (every draw singular) an error.
_MAX_PROJECTION_REDRAWS = 16


def _draw_usable_projection(plan: ExperimentPlan, rng: np.random.Generator):
    """Draw a projection whose lag basis yields solvable normal equations."""
    zeros = np.zeros(plan.num_lags)
    for _ in range(_MAX_PROJECTION_REDRAWS):
        proj = _draw_projection(plan.projection, plan.scenario.num_sensors, rng)
        basis = build_lag_basis(proj, plan.num_lags)
        try:
            linalg.solve_symmetric(basis.gram, zeros)
        except SingularSystem:
            continue
        return proj, basis
    raise SingularSystem(
        f"no usable {plan.projection.kind} projection for K={plan.num_lags} "
        f"after {_MAX_PROJECTION_REDRAWS} draws"
    )


def apply_noise_uncertainty(
    noise_power: float, beta_db: float, rng: np.random.Generator
) -> float:
    """Noise power a miscalibrated receiver assumes, for threshold setting only.

    The dB error is uniform on [-beta_db, beta_db]; the returned power is the
    true one scaled by that factor. Data generation always uses the true power.
    """
    if not (beta_db >= 0.0):
        raise ConfigInvalid("beta_db", f"requires beta_db >= 0, got {beta_db}")
    offset_db = rng.uniform(-beta_db, beta_db)
    return 10.0 ** (offset_db / 10.0) * noise_power


def _statistics_block(
    plan: ExperimentPlan,
    stream_key: tuple[int, ...],
    start: int,
    stop: int,
    include_h1: bool,
    fixed_projection,
) -> np.ndarray:
    """Rows (covariance_h0, energy_h0, covariance_h1, energy_h1, assumed_power)
    for trials start..stop-1. H1 columns are NaN when not simulated."""
    cfg = plan.scenario
    factor = None
    if include_h1:
        factor = linalg.cholesky(signal_covariance(cfg).full())
    out = np.empty((stop - start, 5))
    for row, trial in enumerate(range(start, stop)):
        rng = _trial_rng(plan.seed, stream_key + (trial,))
        if fixed_projection is None:
            proj, basis = _draw_usable_projection(plan, rng)
        else:
            proj = fixed_projection
            basis = build_lag_basis(proj, plan.num_lags)
        stats = [math.nan] * 4
        hypotheses = (Hypothesis.H0, Hypothesis.H1) if include_h1 else (Hypothesis.H0,)
        for hyp in hypotheses:
            x = sample_raw(cfg, hyp, plan.num_snapshots, rng, signal_factor=factor)
            batch = mac_transmit(proj, x, cfg.sigma_w2, rng)
            lags = estimate_lags(sample_covariance(batch), basis)
            offset = 0 if hyp is Hypothesis.H0 else 2
            stats[offset] = covariance_ratio_from_lags(lags).statistic
            stats[offset + 1] = energy_statistic(batch).statistic
        assumed = apply_noise_uncertainty(cfg.noise_power, plan.beta_db, rng)
        out[row] = (stats[0], stats[1], stats[2], stats[3], assumed)
    return out


def statistic_populations(
    plan: ExperimentPlan,
    *,
    stream_key: tuple[int, ...] = (_STREAM_EVALUATE,),
    include_h1: bool = True,
    workers: int | None = None,
) -> StatisticPopulations:
    """Simulate all trials of a plan and collect the raw decision statistics."""
    workers = _resolve_workers(workers)
    fixed = None
    if plan.fixed_projection:
        rng = _trial_rng(plan.seed, (_STREAM_PROJECTION,))
        fixed, _ = _draw_usable_projection(plan, rng)
    if workers <= 1 or plan.trials < 2 * workers:
        rows = _statistics_block(plan, stream_key, 0, plan.trials, include_h1, fixed)
    else:
        bounds = np.linspace(0, plan.trials, workers + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _statistics_block, plan, stream_key, lo, hi, include_h1, fixed
                )
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            rows = np.concatenate([f.result() for f in futures], axis=0)
    return StatisticPopulations(
        covariance_h0=rows[:, 0].copy(),
        energy_h0=rows[:, 1].copy(),
        covariance_h1=rows[:, 2].copy() if include_h1 else None,
        energy_h1=rows[:, 3].copy() if include_h1 else None,
        assumed_noise_power=rows[:, 4].copy(),
    )


def _rate_with_halfwidth(exceedances: int, trials: int) -> tuple[float, float]:
    """Raw rate plus half the 95% Wilson interval width."""
    z2 = _WILSON_Z * _WILSON_Z
    p = exceedances / trials
    denom = 1.0 + z2 / trials
    radius = _WILSON_Z * math.sqrt(
        p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)
    )
    return p, radius / denom


def calibrate_threshold(
    plan: ExperimentPlan,
    *,
    stream_key: tuple[int, ...] = (_STREAM_CALIBRATE,),
    workers: int | None = None,
) -> float:
    """Empirical threshold for the covariance-ratio detector.

    Simulates ``plan.trials`` noise-only trials and returns the order
    statistic at the (1 - alpha0) empirical quantile, the smallest observed
    value whose exceedance rate does not overshoot alpha0 by more than one
    trial's worth. Requires at least 100 trials and trials * alpha0 >= 10 so
    the quantile is meaningful.
    """
    if plan.trials < 100:
        raise InsufficientTrials(f"calibration needs >= 100 trials, got {plan.trials}")
    if plan.trials * plan.alpha0 < 10.0:
        raise InsufficientTrials(
            f"trials * alpha0 = {plan.trials * plan.alpha0:.2f} < 10; "
            "the calibrated quantile would be unreliable"
        )
    pops = statistic_populations(
        plan, stream_key=stream_key, include_h1=False, workers=workers
    )
    values = np.sort(pops.covariance_h0)
    # ceil((1 - alpha0) * trials) as an exact 1-based index; the epsilon keeps
    # binary-decimal rounding of alpha0 * trials from shifting it by one.
    index = plan.trials - math.floor(plan.alpha0 * plan.trials + 1e-9)
    index = min(max(index, 1), plan.trials)
    return float(values[index - 1])


def estimate_rates(
    plan: ExperimentPlan,
    tau: float,
    *,
    stream_key: tuple[int, ...] = (_STREAM_EVALUATE,),
    workers: int | None = None,
) -> MonteCarloResult:
    """Covariance-ratio detector rates at a fixed threshold.

    Runs ``plan.trials`` paired H0/H1 pipelines on a stream disjoint from the
    calibration stream and counts exceedances of ``tau``.
    """
    if math.isnan(tau):
        raise ConfigInvalid("tau", "threshold must not be NaN")
    pops = statistic_populations(plan, stream_key=stream_key, workers=workers)
    pf, pf_hw = _rate_with_halfwidth(int((pops.covariance_h0 >= tau).sum()), plan.trials)
    pd, pd_hw = _rate_with_halfwidth(int((pops.covariance_h1 >= tau).sum()), plan.trials)
    return MonteCarloResult(pf, pd, pf_hw, pd_hw, tau, plan.trials)


def evaluate_detectors(
    plan: ExperimentPlan,
    tau_c: float,
    *,
    stream_key: tuple[int, ...] = (_STREAM_EVALUATE,),
    workers: int | None = None,
) -> dict[str, MonteCarloResult]:
    """Rates for every detector in the plan, on one shared set of trials.

    The covariance-ratio detector uses ``tau_c``. The energy detector uses
    the closed-form threshold at the scenario's true noise power. The
    uncertain energy detector recomputes that threshold per trial from the
    power the receiver assumed; its reported ``threshold_used`` is the
    nominal (true-power) value.
    """
    pops = statistic_populations(plan, stream_key=stream_key, workers=workers)
    m = plan.projection.num_measurements
    t = plan.num_snapshots
    mt = m * t
    tau_coeff = math.sqrt(2.0 * mt) * q_inverse(plan.alpha0) + mt
    nominal_tau_e = plan.scenario.noise_power * tau_coeff
    results: dict[str, MonteCarloResult] = {}
    for name in plan.detectors:
        if name == COVARIANCE_RATIO:
            h0, h1 = pops.covariance_h0, pops.covariance_h1
            thresholds, reported = tau_c, tau_c
        elif name == ENERGY:
            h0, h1 = pops.energy_h0, pops.energy_h1
            thresholds, reported = nominal_tau_e, nominal_tau_e
        else:
            h0, h1 = pops.energy_h0, pops.energy_h1
            thresholds, reported = pops.assumed_noise_power * tau_coeff, nominal_tau_e
        pf, pf_hw = _rate_with_halfwidth(int((h0 >= thresholds).sum()), plan.trials)
        pd, pd_hw = _rate_with_halfwidth(int((h1 >= thresholds).sum()), plan.trials)
        results[name] = MonteCarloResult(pf, pd, pf_hw, pd_hw, reported, plan.trials)
    return results


def roc_curve(
    plan: ExperimentPlan,
    *,
    stream_key: tuple[int, ...] = (_STREAM_ROC,),
    workers: int | None = None,
) -> RocCurve:
    """Empirical ROC of one detector by sweeping over pooled statistic values.

    Uses the covariance-ratio detector when the plan includes it, otherwise
    the energy statistic (whose ROC does not depend on how its threshold
    would have been set). Requires at least 500 trials.
    """
    if plan.trials < 500:
        raise InsufficientTrials(f"roc_curve needs >= 500 trials, got {plan.trials}")
    pops = statistic_populations(plan, stream_key=stream_key, workers=workers)
    if COVARIANCE_RATIO in plan.detectors:
        h0, h1, detector = pops.covariance_h0, pops.covariance_h1, COVARIANCE_RATIO
    else:
        h0, h1, detector = pops.energy_h0, pops.energy_h1, ENERGY
    h0_sorted = np.sort(h0)
    h1_sorted = np.sort(h1)
    thresholds = np.unique(np.concatenate([h0_sorted, h1_sorted]))
    n = plan.trials
    pf = 1.0 - np.searchsorted(h0_sorted, thresholds, side="left") / n
    pd = 1.0 - np.searchsorted(h1_sorted, thresholds, side="left") / n
    points = np.empty((thresholds.size + 2, 2))
    points[0] = (1.0, 1.0)
    points[1:-1, 0] = pf
    points[1:-1, 1] = pd
    points[-1] = (0.0, 0.0)
    return RocCurve(points, plan, detector)


def rank_auc(h0_values: np.ndarray, h1_values: np.ndarray) -> float:
    """Area under the empirical ROC via the rank-sum identity (ties count 1/2)."""
    from scipy.stats import rankdata

    h0_values = np.asarray(h0_values, dtype=np.float64)
    h1_values = np.asarray(h1_values, dtype=np.float64)
    ranks = rankdata(np.concatenate([h0_values, h1_values]))
    n0, n1 = h0_values.size, h1_values.size
    r1 = float(ranks[n0:].sum())
    return (r1 - n1 * (n1 + 1) / 2.0) / (n0 * n1)


def sweep_snr(
    plan: ExperimentPlan,
    sigma_v2_grid: list[float],
    *,
    workers: int | None = None,
) -> list[SnrSweepPoint]:
    """Detector rates across sensor-noise levels with a fixed covariance threshold.

    The covariance-ratio threshold is calibrated once at the plan's reference
    scenario and reused at every grid point; the energy thresholds are
    recomputed from each point's (assumed) noise power. The source and fusion
    noise powers stay fixed, so the grid traces out SNR.
    """
    if not sigma_v2_grid:
        raise ConfigInvalid("sigma_v2_grid", "must contain at least one value")
    tau_c = calibrate_threshold(plan, workers=workers)
    points = []
    for i, sigma_v2 in enumerate(sigma_v2_grid):
        scenario = replace(plan.scenario, sigma_v2=float(sigma_v2))
        plan_i = replace(plan, scenario=scenario)
        results = evaluate_detectors(
            plan_i, tau_c, stream_key=(_STREAM_EVALUATE, i), workers=workers
        )
        points.append(SnrSweepPoint(snr_db(scenario), float(sigma_v2), results))
    return points


def sweep_sparsity(
    plan: ExperimentPlan,
    s0_grid: list[float],
    sigma_v2_grid: list[float] | None = None,
    *,
    workers: int | None = None,
) -> list[SparsitySweepPoint]:
    """Covariance-detector rates across sparse-projection densities.

    Runs one configuration per ``s0`` plus an orthonormal-rows reference,
    each with its own threshold calibrated at the reference scenario and
    reused across the SNR grid (default: the reference point alone).
    """
    for s0 in s0_grid:
        if not (s0 >= 1.0):
            raise ConfigInvalid("s0", f"requires s0 >= 1, got {s0}")
    if sigma_v2_grid is None:
        sigma_v2_grid = [plan.scenario.sigma_v2]
    if not sigma_v2_grid:
        raise ConfigInvalid("sigma_v2_grid", "must contain at least one value")
    m = plan.projection.num_measurements
    specs: list[tuple[float | None, ProjectionSpec]] = [
        (float(s0), ProjectionSpec(SPARSE_TERNARY, m, float(s0))) for s0 in s0_grid
    ]
    specs.append((None, ProjectionSpec(ORTHONORMAL_ROWS, m)))
    points = []
    for c, (s0, spec) in enumerate(specs):
        plan_c = replace(plan, projection=spec, detectors=(COVARIANCE_RATIO,))
        tau_c = calibrate_threshold(
            plan_c, stream_key=(_STREAM_CALIBRATE, c), workers=workers
        )
        for i, sigma_v2 in enumerate(sigma_v2_grid):
            scenario = replace(plan_c.scenario, sigma_v2=float(sigma_v2))
            plan_ci = replace(plan_c, scenario=scenario)
            result = estimate_rates(
                plan_ci, tau_c, stream_key=(_STREAM_EVALUATE, c, i), workers=workers
            )
            points.append(
                SparsitySweepPoint(s0, snr_db(scenario), float(sigma_v2), result)
            )
    return points
